/**
 * Wire-conformance contract tests: every adapter response must validate
 * against the client-side schemas, and /generate output must survive the
 * primary pipeline's own parser with zero violations.
 */
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { defaultDeterministicConfig, parseConfig } from "../src/config";
import {
  generateResponseSchema,
  healthResponseSchema,
  metricResponseSchema,
  rankResponseSchema,
} from "../src/schemas";
import {
  RunningServer,
  fixtureRequests,
  parseViaPrimary,
  post,
  primaryAvailable,
  renderViaPrimary,
  startServer,
} from "./helpers";

let server: RunningServer;

beforeAll(async () => {
  server = await startServer(defaultDeterministicConfig());
});

afterAll(async () => {
  await server.close();
});

describe("/rank", () => {
  it("returns one score per document, in request order", async () => {
    const res = await post(server.baseUrl, "/rank", {
      query: "solar panel",
      documents: [
        { id: "a", text: "solar panel efficiency figures" },
        { id: "b", text: "nothing related here" },
      ],
    });
    expect(res.status).toBe(200);
    const body = rankResponseSchema.parse(await res.json());
    expect(body.scores).toHaveLength(2);
    expect(body.scores[0]).toBeGreaterThan(body.scores[1]);
  });

  it("keeps arity on larger batches", async () => {
    const documents = Array.from({ length: 37 }, (_, i) => ({
      id: `d${i}`,
      text: `document number ${i} with filler text`,
    }));
    const res = await post(server.baseUrl, "/rank", { query: "filler", documents });
    const body = rankResponseSchema.parse(await res.json());
    expect(body.scores).toHaveLength(37);
  });

  it("scores are pointwise: batch composition does not matter", async () => {
    const doc = { id: "x", text: "solar panel grid voltage" };
    const alone = rankResponseSchema.parse(
      await (await post(server.baseUrl, "/rank", { query: "solar grid", documents: [doc] })).json()
    );
    const crowded = rankResponseSchema.parse(
      await (
        await post(server.baseUrl, "/rank", {
          query: "solar grid",
          documents: [{ id: "y", text: "unrelated" }, doc, { id: "z", text: "solar solar" }],
        })
      ).json()
    );
    expect(crowded.scores[1]).toBeCloseTo(alone.scores[0], 12);
  });

  it("rejects malformed bodies", async () => {
    const res = await post(server.baseUrl, "/rank", { query: "x" });
    expect(res.status).toBe(400);
  });
});

describe("/metric", () => {
  it("ss scores identical pairs near 1.0", async () => {
    const res = await post(server.baseUrl, "/metric", {
      kind: "ss",
      items: [
        { a: "same text here", b: "same text here" },
        { a: "other words entirely", b: "other words entirely" },
      ],
    });
    const body = metricResponseSchema.parse(await res.json());
    expect(body.values).toHaveLength(2);
    for (const value of body.values) expect(value).toBeGreaterThan(0.99);
  });

  it("response arity always matches request arity", async () => {
    for (const kind of ["ss", "ppl", "acs"]) {
      const items = Array.from({ length: 5 }, (_, i) => ({ a: `text number ${i}` }));
      const res = await post(server.baseUrl, "/metric", { kind, items });
      const body = metricResponseSchema.parse(await res.json());
      expect(body.values).toHaveLength(5);
    }
  });

  it("rejects unknown kinds", async () => {
    const res = await post(server.baseUrl, "/metric", { kind: "bleu", items: [{ a: "x" }] });
    expect(res.status).toBe(400);
  });
});

describe("/health", () => {
  it("reports every configured role as ready", async () => {
    const res = await fetch(`${server.baseUrl}/health`);
    const body = healthResponseSchema.parse(await res.json());
    expect(body).toEqual({
      ranker: true,
      generator: true,
      metric_ss: true,
      metric_ppl: true,
      metric_acs: true,
    });
  });

  it("omits unconfigured roles", async () => {
    const rankerOnly = await startServer(
      parseConfig({ roles: { ranker: { backend: "deterministic" }, metrics: {} } })
    );
    try {
      const body = healthResponseSchema.parse(
        await (await fetch(`${rankerOnly.baseUrl}/health`)).json()
      );
      expect(body).toEqual({ ranker: true });
      const res = await post(rankerOnly.baseUrl, "/generate", { prompt: "x", max_new_tokens: 8 });
      expect(res.status).toBe(503);
    } finally {
      await rankerOnly.close();
    }
  });
});

describe("/generate", () => {
  it("structured responses satisfy the wire schema and request contract", async () => {
    for (const request of fixtureRequests().slice(0, 6)) {
      const res = await post(server.baseUrl, "/generate", request);
      expect(res.status).toBe(200);
      const body = generateResponseSchema.parse(await res.json());
      expect(body.sentences).toHaveLength(request.n_sent);
      expect(new Set(body.sentences).size).toBe(request.n_sent);
    }
  });

  it("is deterministic for identical requests", async () => {
    const request = fixtureRequests()[0];
    const first = await (await post(server.baseUrl, "/generate", request)).json();
    const second = await (await post(server.baseUrl, "/generate", request)).json();
    expect(second).toEqual(first);
  });

  it.skipIf(!primaryAvailable())(
    "output parses through the primary parser on 20 fixture prompts with zero violations",
    async () => {
      let violations = 0;
      for (const request of fixtureRequests()) {
        const res = await post(server.baseUrl, "/generate", request);
        expect(res.status).toBe(200);
        const body = await res.json();
        const outcome = parseViaPrimary(JSON.stringify(body), request);
        if (!outcome.ok) violations += 1;
      }
      expect(violations).toBe(0);
    }
  );

  it.skipIf(!primaryAvailable())(
    "raw mode serves the primary's rendered prompt templates",
    async () => {
      for (const request of fixtureRequests().slice(0, 4)) {
        const prompt = renderViaPrimary(request);
        const res = await post(server.baseUrl, "/generate", {
          prompt,
          max_new_tokens: 4 * request.n_sent * request.max_tokens,
        });
        expect(res.status).toBe(200);
        const body = (await res.json()) as { text: string };
        expect(typeof body.text).toBe("string");
        const outcome = parseViaPrimary(body.text, request);
        expect(outcome.ok, (outcome.violations ?? []).join("; ")).toBe(true);
      }
    }
  );
});
