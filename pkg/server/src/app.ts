/**
 * HTTP surface: /rank, /generate, /metric, /health. Every response either
 * matches the wire schema with arity equal to the request or is an error
 * payload tagged with the failing role.
 */
import express, { Express, Request, Response } from "express";
import {
  DeterministicGenerator,
  DeterministicMetrics,
  GeneratorBackend,
  LexicalOverlapRanker,
  MetricBackend,
  RankerBackend,
  loadTransformersGenerator,
  loadTransformersRanker,
  parsePrompt,
} from "./backends";
import { AdapterConfig, RoleConfig } from "./config";
import {
  generateRequestSchema,
  metricRequestSchema,
  rankRequestSchema,
  rawGenerateRequestSchema,
} from "./schemas";

export interface AdapterState {
  app: Express;
  readiness: Record<string, boolean>;
}

async function buildRanker(role: RoleConfig, _config: AdapterConfig): Promise<RankerBackend> {
  if (role.backend === "transformers") return loadTransformersRanker(role.model as string);
  return new LexicalOverlapRanker();
}

async function buildGenerator(role: RoleConfig, config: AdapterConfig): Promise<GeneratorBackend> {
  if (role.backend === "transformers") {
    return loadTransformersGenerator(role.model as string, config.deterministic);
  }
  return new DeterministicGenerator(config.seed);
}

class Gate {
  private active = 0;
  private waiters: (() => void)[] = [];

  constructor(private readonly limit: number) {}

  async run<T>(work: () => Promise<T>): Promise<T> {
    if (this.active >= this.limit) {
      await new Promise<void>((resolve) => this.waiters.push(resolve));
    }
    this.active++;
    try {
      return await work();
    } finally {
      this.active--;
      const next = this.waiters.shift();
      if (next) next();
    }
  }
}

export async function buildApp(config: AdapterConfig): Promise<AdapterState> {
  const readiness: Record<string, boolean> = {};
  let ranker: RankerBackend | null = null;
  let generator: GeneratorBackend | null = null;
  const metrics: Partial<Record<string, MetricBackend>> = {};

  if (config.roles.ranker) {
    try {
      ranker = await buildRanker(config.roles.ranker, config);
      readiness.ranker = true;
    } catch {
      readiness.ranker = false;
    }
  }
  if (config.roles.generator) {
    try {
      generator = await buildGenerator(config.roles.generator, config);
      readiness.generator = true;
    } catch {
      readiness.generator = false;
    }
  }
  for (const kind of ["ss", "ppl", "acs"] as const) {
    const role = config.roles.metrics[kind];
    if (!role) continue;
    try {
      // Metric kinds share the deterministic backend; model-backed metric
      // services would load per-kind models here.
      metrics[kind] = new DeterministicMetrics();
      readiness[`metric_${kind}`] = true;
    } catch {
      readiness[`metric_${kind}`] = false;
    }
  }

  const gate = new Gate(config.max_concurrent);
  const app = express();
  app.use(express.json({ limit: "8mb" }));

  app.get("/health", (_req: Request, res: Response) => {
    res.json(readiness);
  });

  app.post("/rank", (req: Request, res: Response) => {
    if (!ranker) {
      res.status(503).json({ error: "ranker role not configured or failed", role: "ranker" });
      return;
    }
    const parsed = rankRequestSchema.safeParse(req.body);
    if (!parsed.success) {
      res.status(400).json({ error: parsed.error.message, role: "ranker" });
      return;
    }
    const active = ranker;
    void gate
      .run(() => active.score(parsed.data.query, parsed.data.documents.map((d) => d.text)))
      .then((scores) => res.json({ scores }))
      .catch((err: Error) => res.status(500).json({ error: err.message, role: "ranker" }));
  });

  app.post("/generate", (req: Request, res: Response) => {
    if (!generator) {
      res
        .status(503)
        .json({ error: "generator role not configured or failed", role: "generator" });
      return;
    }
    const body = req.body ?? {};
    const isRaw = typeof body.prompt === "string";
    const request = isRaw
      ? rawGenerateRequestSchema.safeParse(body)
      : generateRequestSchema.safeParse(body);
    if (!request.success) {
      res.status(400).json({ error: request.error.message, role: "generator" });
      return;
    }
    const active = generator;
    void gate
      .run(async () => {
        if (isRaw) {
          const structured = parsePrompt((request.data as { prompt: string }).prompt);
          const out = await active.generate(structured);
          // Raw mode replies with completion text; the client re-parses it.
          return { text: JSON.stringify(out) };
        }
        return active.generate(request.data as never);
      })
      .then((payload) => res.json(payload))
      .catch((err: Error) => res.status(500).json({ error: err.message, role: "generator" }));
  });

  app.post("/metric", (req: Request, res: Response) => {
    const parsed = metricRequestSchema.safeParse(req.body);
    if (!parsed.success) {
      res.status(400).json({ error: parsed.error.message, role: "metric" });
      return;
    }
    const backend = metrics[parsed.data.kind];
    if (!backend) {
      res.status(503).json({
        error: `metric kind ${parsed.data.kind} not configured or failed`,
        role: `metric_${parsed.data.kind}`,
      });
      return;
    }
    void gate
      .run(() => backend.values(parsed.data.kind, parsed.data.items))
      .then((values) => res.json({ values }))
      .catch((err: Error) =>
        res.status(500).json({ error: err.message, role: `metric_${parsed.data.kind}` })
      );
  });

  return { app, readiness };
}
