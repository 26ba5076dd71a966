/**
 * Entry point: `node dist/server.js [config.json]`. With no argument the
 * adapter serves every role with the deterministic backends on port 8601.
 */
import { buildApp } from "./app";
import { defaultDeterministicConfig, loadConfig } from "./config";

async function main(): Promise<void> {
  const configPath = process.argv[2];
  const config = configPath ? loadConfig(configPath) : defaultDeterministicConfig();
  const { app, readiness } = await buildApp(config);
  const server = app.listen(config.port, () => {
    const address = server.address();
    const port = typeof address === "object" && address ? address.port : config.port;
    console.log(`rankforge model server on :${port}`);
    console.log(`roles: ${JSON.stringify(readiness)}`);
  });
}

main().catch((err) => {
  console.error(`startup failed: ${err.message ?? err}`);
  process.exit(1);
});
