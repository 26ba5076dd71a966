/**
 * Model backends behind the wire protocols.
 *
 * The deterministic backends are pure functions of (request, seed) and keep
 * the adapter fully testable with no checkpoints. The transformers backends
 * load real models through @xenova/transformers when it is installed and a
 * model id is configured; they are optional and fail soft at startup.
 */
import type { GenerateRequest, GenerateResponse, MetricKind } from "./schemas";

export function tokenize(text: string): string[] {
  return text.toLowerCase().match(/[\p{L}\p{N}]+/gu) ?? [];
}

export function normalize(text: string): string {
  return tokenize(text).join(" ");
}

function fnv1a(input: string): number {
  let hash = 0x811c9dc5;
  for (let i = 0; i < input.length; i++) {
    hash ^= input.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193);
  }
  return hash >>> 0;
}

/** Small deterministic PRNG; good enough for template variation. */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

// ---------------------------------------------------------------------------
// Ranker
// ---------------------------------------------------------------------------

export interface RankerBackend {
  score(query: string, texts: string[]): Promise<number[]>;
}

/**
 * Pointwise lexical scorer: saturating term-frequency match per query term
 * with a mild length normalization. No collection statistics, so a document's
 * score never depends on what else is in the batch.
 */
export class LexicalOverlapRanker implements RankerBackend {
  async score(query: string, texts: string[]): Promise<number[]> {
    const queryTerms = [...new Set(tokenize(query))];
    return texts.map((text) => {
      const tokens = tokenize(text);
      const counts = new Map<string, number>();
      for (const token of tokens) counts.set(token, (counts.get(token) ?? 0) + 1);
      const lengthNorm = 1 + 0.4 * (tokens.length / 64);
      let total = 0;
      for (const term of queryTerms) {
        const tf = counts.get(term) ?? 0;
        total += tf / (tf + 1.2 * lengthNorm);
      }
      return total;
    });
  }
}

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

export interface GeneratorBackend {
  generate(request: GenerateRequest): Promise<GenerateResponse>;
}

const LEAD_INS = [
  ["reference", "listings", "mention"],
  ["related", "overviews", "describe"],
  ["background", "materials", "cover"],
  ["industry", "summaries", "note"],
  ["archived", "digests", "compare"],
];

const FILLERS = [
  "alongside",
  "regarding",
  "with",
  "plus",
  "near",
  "amid",
  "through",
  "around",
  "beside",
  "versus",
];

const BUFFER_SIZE = 12;
const MIN_TERMS = 5;

/**
 * Template generator mirroring the attack recipe: extract query-associated
 * buffer terms from the context, then compose fluent-ish sentences that use
 * several of them without ever containing the query itself.
 */
export class DeterministicGenerator implements GeneratorBackend {
  constructor(private readonly seed: number = 0) {}

  async generate(request: GenerateRequest): Promise<GenerateResponse> {
    const bufferA = this.bufferTerms(request.context_docs, request.query);
    const queryNorm = normalize(request.query);
    const pool = bufferA.filter((term) => !term.includes(queryNorm));
    if (pool.length < 2) {
      throw new Error("context vocabulary too small to compose sentences");
    }
    const rng = mulberry32(
      fnv1a(
        JSON.stringify([
          this.seed,
          request.mode,
          request.query,
          request.target_document,
          request.previous_sentences,
        ])
      )
    );
    const fillers = FILLERS.filter((f) => !f.includes(queryNorm));
    const seen = new Set<string>(request.previous_sentences);
    const sentences: string[] = [];
    for (let j = 0; j < request.n_sent; j++) {
      const wanted = Math.min(
        MIN_TERMS + (rng() < 0.5 ? 1 : 0),
        pool.length,
        request.max_tokens
      );
      let sentence: string | null = null;
      for (let shift = 0; shift < pool.length && sentence === null; shift++) {
        const terms = Array.from(
          { length: wanted },
          (_, i) => pool[(j + shift + i) % pool.length]
        );
        if (request.mode === "feedback") {
          const copies = Math.min(2, Math.max(0, request.max_tokens - wanted));
          for (let c = 0; c < copies; c++) terms.push(pool[0]);
        }
        const candidate = compose(terms, j, rng, fillers, queryNorm, request.max_tokens);
        if (candidate !== null && !seen.has(candidate)) sentence = candidate;
      }
      if (sentence === null) {
        throw new Error("could not compose distinct query-safe sentences");
      }
      seen.add(sentence);
      sentences.push(sentence);
    }
    return { buffer_a: bufferA, sentences };
  }

  private bufferTerms(contextDocs: string[], query: string): string[] {
    const counts = new Map<string, number>();
    for (const doc of contextDocs) {
      for (const token of tokenize(doc)) counts.set(token, (counts.get(token) ?? 0) + 1);
    }
    const queryTerms = new Set(tokenize(query));
    return [...counts.entries()]
      .map(([term, tf]) => ({ term, score: tf * (queryTerms.has(term) ? 2 : 1) }))
      .sort((a, b) => b.score - a.score || (a.term < b.term ? -1 : 1))
      .slice(0, BUFFER_SIZE)
      .map((entry) => entry.term);
  }
}

function compose(
  terms: string[],
  index: number,
  rng: () => number,
  fillers: string[],
  queryNorm: string,
  maxTokens: number
): string | null {
  const lead = LEAD_INS[index % LEAD_INS.length];
  const offset = fillers.length ? Math.floor(rng() * fillers.length) : 0;
  for (let attempt = 0; attempt < fillers.length + 2; attempt++) {
    let words: string[] = [];
    terms.forEach((term, i) => {
      if (i > 0 && fillers.length && attempt <= fillers.length) {
        words.push(fillers[(offset + attempt + i) % fillers.length]);
      }
      words.push(term);
    });
    if (lead.length + words.length <= maxTokens && attempt < fillers.length) {
      words = [...lead, ...words];
    }
    if (words.length > maxTokens) continue;
    const body = words.join(" ");
    const sentence = body.charAt(0).toUpperCase() + body.slice(1) + ".";
    if (!normalize(sentence).includes(queryNorm)) return sentence;
  }
  return null;
}

// ---------------------------------------------------------------------------
// Raw prompt handling
// ---------------------------------------------------------------------------

/**
 * Recover the structured fields from a rendered prompt so the deterministic
 * generator can serve raw-completion mode. The prompt layout is the one the
 * primary renders: labeled "Inputs:" lines plus numbered context documents.
 */
export function parsePrompt(prompt: string): GenerateRequest {
  const queryMatch = prompt.match(/- Target Query: (.*)/);
  const docMatch = prompt.match(/- Target Document: (.*)/);
  const nSentMatch = prompt.match(/exactly (\d+) (?:new )?adversarial sentences/);
  const budgetMatch = prompt.match(/<= (\d+) tokens/);
  if (!queryMatch || !docMatch || !nSentMatch) {
    throw new Error("prompt does not match the expected template layout");
  }
  const lines = prompt.split("\n");
  const contextDocs: string[] = [];
  const previous: string[] = [];
  let section: "context" | "previous" | null = null;
  for (const line of lines) {
    const contextLabel = line.match(/- Top-5 Ranked Documents \(Buffer A Source\): ?(.*)/);
    const previousLabel = line.match(/- Previously generated sentences: ?(.*)/);
    if (contextLabel) {
      section = "context";
      const first = contextLabel[1].replace(/^1\. /, "").trim();
      if (first) contextDocs.push(first);
      continue;
    }
    if (previousLabel) {
      section = "previous";
      const first = previousLabel[1].replace(/^1\. /, "").trim();
      if (first) previous.push(first);
      continue;
    }
    const numbered = line.match(/^(\d+)\. (.*)$/);
    if (numbered && section === "context") {
      contextDocs.push(numbered[2].trim());
    } else if (numbered && section === "previous") {
      previous.push(numbered[2].trim());
    } else if (line.startsWith("- ") || line.trim() === "") {
      if (section === "previous" && line.trim() === "") continue;
      section = null;
    }
  }
  return {
    mode: previous.length > 0 ? "feedback" : "initial",
    query: queryMatch[1].trim(),
    target_document: docMatch[1].trim(),
    context_docs: contextDocs,
    previous_sentences: previous,
    previous_buffer_a: [],
    n_sent: parseInt(nSentMatch[1], 10),
    max_tokens: budgetMatch ? parseInt(budgetMatch[1], 10) : 40,
  };
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

export interface MetricBackend {
  values(kind: MetricKind, items: { a: string; b?: string }[]): Promise<number[]>;
}

/**
 * Deterministic metric stand-ins. ss is token-set F1 (identical texts score
 * 1.0); ppl maps repetition to a pseudo-perplexity in [10, 110]; acs rewards
 * moderate sentence lengths with a score in [0, 1].
 */
export class DeterministicMetrics implements MetricBackend {
  async values(kind: MetricKind, items: { a: string; b?: string }[]): Promise<number[]> {
    return items.map((item) => {
      if (kind === "ss") return tokenSetF1(item.a, item.b ?? item.a);
      if (kind === "ppl") return pseudoPerplexity(item.a);
      return acceptability(item.a);
    });
  }
}

function tokenSetF1(a: string, b: string): number {
  const setA = new Set(tokenize(a));
  const setB = new Set(tokenize(b));
  if (setA.size === 0 && setB.size === 0) return 1.0;
  if (setA.size === 0 || setB.size === 0) return 0.0;
  let common = 0;
  for (const token of setA) if (setB.has(token)) common++;
  const precision = common / setA.size;
  const recall = common / setB.size;
  return precision + recall === 0 ? 0 : (2 * precision * recall) / (precision + recall);
}

function pseudoPerplexity(text: string): number {
  const tokens = tokenize(text);
  if (tokens.length === 0) return 10;
  const distinct = new Set(tokens).size;
  return 10 + 100 * (1 - distinct / tokens.length);
}

function acceptability(text: string): number {
  const sentences = text.split(/[.!?]+/).filter((s) => s.trim().length > 0);
  if (sentences.length === 0) return 0;
  const lengths = sentences.map((s) => tokenize(s).length);
  const mean = lengths.reduce((x, y) => x + y, 0) / lengths.length;
  const sweetSpot = Math.exp(-(((mean - 14) / 14) ** 2));
  return Math.max(0, Math.min(1, 0.35 + 0.65 * sweetSpot));
}

// ---------------------------------------------------------------------------
// Optional transformers-backed implementations
// ---------------------------------------------------------------------------

/* eslint-disable @typescript-eslint/no-explicit-any */
async function importTransformers(): Promise<any> {
  const name = "@xenova/transformers";
  try {
    return await import(name);
  } catch {
    throw new Error(`${name} is not installed; use the deterministic backend`);
  }
}

export async function loadTransformersRanker(model: string): Promise<RankerBackend> {
  const mod = await importTransformers();
  const pipe = await mod.pipeline("text-classification", model);
  return {
    async score(query: string, texts: string[]): Promise<number[]> {
      const scores: number[] = [];
      for (const text of texts) {
        const out = await pipe({ text: query, text_pair: text }, { topk: 1 });
        scores.push(Array.isArray(out) ? out[0].score : out.score);
      }
      return scores;
    },
  };
}

export async function loadTransformersGenerator(
  model: string,
  deterministic: boolean
): Promise<GeneratorBackend> {
  const mod = await importTransformers();
  const pipe = await mod.pipeline("text-generation", model);
  return {
    async generate(request: GenerateRequest): Promise<GenerateResponse> {
      // Prompt text mirrors what the primary would send in raw mode; the
      // reply must contain one JSON object with buffer_a and sentences.
      const prompt = JSON.stringify(request);
      const out = await pipe(prompt, {
        max_new_tokens: 8 * request.n_sent * request.max_tokens,
        do_sample: !deterministic,
        temperature: deterministic ? 0 : 0.7,
      });
      const text: string = Array.isArray(out) ? out[0].generated_text : out.generated_text;
      const start = text.indexOf("{");
      if (start === -1) throw new Error("model reply carried no JSON object");
      const parsed = JSON.parse(text.slice(start, text.lastIndexOf("}") + 1));
      return { buffer_a: parsed.buffer_a ?? [], sentences: parsed.sentences ?? [] };
    },
  };
}
