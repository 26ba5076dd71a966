/**
 * Wire schemas for the three service protocols the primary pipeline speaks.
 * Requests are validated on the way in; tests validate responses on the way
 * out, so conformance is checked from both sides.
 */
import { z } from "zod";

export const rankRequestSchema = z.object({
  query: z.string(),
  documents: z.array(z.object({ id: z.string(), text: z.string() })).min(1),
});
export type RankRequest = z.infer<typeof rankRequestSchema>;

export const rankResponseSchema = z.object({
  scores: z.array(z.number()),
});

export const generateRequestSchema = z
  .object({
    mode: z.enum(["initial", "feedback"]),
    query: z.string().min(1),
    target_document: z.string().min(1),
    context_docs: z.array(z.string()).min(1),
    previous_sentences: z.array(z.string()).default([]),
    previous_buffer_a: z.array(z.string()).default([]),
    n_sent: z.number().int().min(1),
    max_tokens: z.number().int().min(1),
  })
  .refine(
    (req) => (req.mode === "feedback") === (req.previous_sentences.length > 0),
    { message: "feedback mode requires previous_sentences; initial mode forbids them" }
  );
export type GenerateRequest = z.infer<typeof generateRequestSchema>;

export const rawGenerateRequestSchema = z.object({
  prompt: z.string().min(1),
  max_new_tokens: z.number().int().min(1),
});
export type RawGenerateRequest = z.infer<typeof rawGenerateRequestSchema>;

export const generateResponseSchema = z.object({
  buffer_a: z.array(z.string()),
  sentences: z.array(z.string().min(1)),
});
export type GenerateResponse = z.infer<typeof generateResponseSchema>;

export const metricKinds = ["ss", "ppl", "acs"] as const;
export type MetricKind = (typeof metricKinds)[number];

export const metricRequestSchema = z.object({
  kind: z.enum(metricKinds),
  items: z.array(z.object({ a: z.string(), b: z.string().optional() })).min(1),
});
export type MetricRequest = z.infer<typeof metricRequestSchema>;

export const metricResponseSchema = z.object({
  values: z.array(z.number()),
});

export const healthResponseSchema = z.record(z.string(), z.boolean());
