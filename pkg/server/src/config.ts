/**
 * Adapter configuration. Roles are independently optional: a ranker-only
 * deployment simply omits the generator and metric roles, and /health
 * reports only the roles that were configured.
 */
import { readFileSync } from "fs";
import { z } from "zod";

const roleSchema = z.object({
  backend: z.enum(["deterministic", "transformers"]).default("deterministic"),
  model: z.string().optional(),
});
export type RoleConfig = z.infer<typeof roleSchema>;

const configSchema = z.object({
  port: z.number().int().min(0).default(8601),
  seed: z.number().int().default(0),
  // Pins sampling temperature to zero on model-backed generators so
  // integration runs are reproducible.
  deterministic: z.boolean().default(true),
  max_concurrent: z.number().int().min(1).default(8),
  roles: z
    .object({
      ranker: roleSchema.optional(),
      generator: roleSchema.optional(),
      metrics: z
        .object({
          ss: roleSchema.optional(),
          ppl: roleSchema.optional(),
          acs: roleSchema.optional(),
        })
        .default({}),
    })
    .default({ metrics: {} }),
});
export type AdapterConfig = z.infer<typeof configSchema>;

export function parseConfig(raw: unknown): AdapterConfig {
  return configSchema.parse(raw);
}

export function loadConfig(path: string): AdapterConfig {
  const raw = JSON.parse(readFileSync(path, "utf-8"));
  const config = parseConfig(raw);
  for (const [role, entry] of Object.entries({
    ranker: config.roles.ranker,
    generator: config.roles.generator,
    ...config.roles.metrics,
  })) {
    if (entry && entry.backend === "transformers" && !entry.model) {
      throw new Error(`role ${role}: transformers backend needs a model id`);
    }
  }
  return config;
}

export function defaultDeterministicConfig(): AdapterConfig {
  return parseConfig({
    roles: {
      ranker: { backend: "deterministic" },
      generator: { backend: "deterministic" },
      metrics: {
        ss: { backend: "deterministic" },
        ppl: { backend: "deterministic" },
        acs: { backend: "deterministic" },
      },
    },
  });
}
