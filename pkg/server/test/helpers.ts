import { spawnSync } from "child_process";
import { AddressInfo } from "net";
import { Server } from "http";
import { buildApp } from "../src/app";
import { AdapterConfig } from "../src/config";
import type { GenerateRequest } from "../src/schemas";

export interface RunningServer {
  baseUrl: string;
  close: () => Promise<void>;
}

export async function startServer(config: AdapterConfig): Promise<RunningServer> {
  const { app } = await buildApp(config);
  const server: Server = await new Promise((resolve) => {
    const s = app.listen(0, () => resolve(s));
  });
  const port = (server.address() as AddressInfo).port;
  return {
    baseUrl: `http://127.0.0.1:${port}`,
    close: () => new Promise((resolve) => server.close(() => resolve())),
  };
}

export async function post(baseUrl: string, path: string, body: unknown): Promise<Response> {
  return fetch(`${baseUrl}${path}`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
}

const PARSE_BRIDGE = `
import json, sys
from rankforge.generation import GenerationRequest, GenerationMode, parse_generation
from rankforge.errors import GenerationParseError, GenerationValidationError

payload = json.load(sys.stdin)
req = payload["request"]
request = GenerationRequest(
    mode=GenerationMode(req["mode"]),
    query=req["query"],
    target_document=req["target_document"],
    context_docs=tuple(req["context_docs"]),
    n_sent=req["n_sent"],
    max_tokens=req["max_tokens"],
    previous_sentences=tuple(req.get("previous_sentences", [])),
    previous_buffer_a=tuple(req.get("previous_buffer_a", [])),
)
try:
    response = parse_generation(payload["raw"], request)
except (GenerationParseError, GenerationValidationError) as exc:
    violations = getattr(exc, "violations", None) or [str(exc)]
    print(json.dumps({"ok": False, "violations": violations}))
else:
    print(json.dumps({"ok": True, "sentences": list(response.sentences)}))
`;

const RENDER_BRIDGE = `
import json, sys
from rankforge.generation import GenerationRequest, GenerationMode, render_prompt

req = json.load(sys.stdin)
request = GenerationRequest(
    mode=GenerationMode(req["mode"]),
    query=req["query"],
    target_document=req["target_document"],
    context_docs=tuple(req["context_docs"]),
    n_sent=req["n_sent"],
    max_tokens=req["max_tokens"],
    previous_sentences=tuple(req.get("previous_sentences", [])),
    previous_buffer_a=tuple(req.get("previous_buffer_a", [])),
)
print(json.dumps({"prompt": render_prompt(request)}))
`;

function runPython(script: string, payload: unknown): Record<string, unknown> {
  const out = spawnSync("python3", ["-c", script], {
    input: JSON.stringify(payload),
    encoding: "utf-8",
  });
  if (out.status !== 0) {
    throw new Error(`python bridge failed: ${out.stderr || out.stdout}`);
  }
  return JSON.parse(out.stdout.trim());
}

/** True when the primary package is importable; contract tests need it. */
export function primaryAvailable(): boolean {
  const out = spawnSync("python3", ["-c", "import rankforge"], { encoding: "utf-8" });
  return out.status === 0;
}

/** Run the primary's response parser over a raw reply for a given request. */
export function parseViaPrimary(
  raw: string,
  request: GenerateRequest
): { ok: boolean; violations?: string[]; sentences?: string[] } {
  return runPython(PARSE_BRIDGE, { raw, request }) as never;
}

/** Render the primary's actual prompt template for a structured request. */
export function renderViaPrimary(request: GenerateRequest): string {
  return (runPython(RENDER_BRIDGE, request) as { prompt: string }).prompt;
}

const TOPIC_WORDS: Record<string, string[]> = {
  tax: ["income", "tax", "return", "filing", "deduction", "refund", "form", "payroll"],
  travel: ["visa", "passport", "border", "flight", "itinerary", "customs", "luggage", "embassy"],
  health: ["protein", "vitamin", "diet", "fiber", "calcium", "nutrition", "exercise", "sleep"],
  energy: ["solar", "panel", "inverter", "battery", "grid", "voltage", "efficiency", "storage"],
};

/** Twenty structured fixture requests spanning topics, modes, and budgets. */
export function fixtureRequests(): GenerateRequest[] {
  const requests: GenerateRequest[] = [];
  const topics = Object.keys(TOPIC_WORDS);
  for (let i = 0; i < 20; i++) {
    const words = TOPIC_WORDS[topics[i % topics.length]];
    const query = words.slice(0, 3).join(" ");
    const context = [
      `${words.slice(0, 6).join(" ")} appears in the leading records.`,
      `Summaries list ${words.slice(2, 7).join(" ")} with annual figures.`,
      `${words[1]} and ${words[4]} recur across public listings and ${words[5]} notes.`,
    ];
    const feedback = i % 4 === 3;
    requests.push({
      mode: feedback ? "feedback" : "initial",
      query,
      target_document: `A plain document about ${words[6]} and general ${words[7]} records. It has two sentences.`,
      context_docs: context,
      previous_sentences: feedback
        ? [`Earlier remark on ${words[0]} unchanged.`, `Second remark on ${words[1]} unchanged.`]
        : [],
      previous_buffer_a: feedback ? words.slice(0, 5) : [],
      n_sent: 2 + (i % 5),
      max_tokens: 25 + (i % 4) * 5,
    });
  }
  return requests;
}
