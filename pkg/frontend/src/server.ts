#!/usr/bin/env node
/**
 * Reference remote-model server.
 *
 *   node dist/server.js --stdio        one NDJSON request per stdin line,
 *                                      one response per stdout line
 *   node dist/server.js --tcp [port]   same protocol per TCP connection;
 *                                      the bound address is announced on
 *                                      stderr as "listening on host:port"
 *
 * Blank lines are ignored; every other line gets exactly one response, and
 * no input -- however malformed -- takes the server down.
 */
import net from "node:net";
import readline from "node:readline";

import { handleLine, WireResponse } from "./protocol";

function respond(write: (chunk: string) => void, response: WireResponse): void {
  write(JSON.stringify(response) + "\n");
}

export function serveStdio(): void {
  const rl = readline.createInterface({ input: process.stdin, crlfDelay: Infinity });
  rl.on("line", (line: string) => {
    if (line.trim() === "") return;
    respond((chunk) => process.stdout.write(chunk), handleLine(line));
  });
  rl.on("close", () => process.exit(0));
}

export function serveTcp(port: number, host = "127.0.0.1"): net.Server {
  const server = net.createServer((socket) => {
    const rl = readline.createInterface({ input: socket, crlfDelay: Infinity });
    rl.on("line", (line: string) => {
      if (line.trim() === "") return;
      if (socket.writable) {
        respond((chunk) => socket.write(chunk), handleLine(line));
      }
    });
    socket.on("error", () => socket.destroy());
  });
  server.listen(port, host, () => {
    const address = server.address() as net.AddressInfo;
    process.stderr.write(`listening on ${address.address}:${address.port}\n`);
  });
  return server;
}

function main(argv: string[]): void {
  const args = argv.slice(2);
  if (args.includes("--tcp")) {
    const portArg = args[args.indexOf("--tcp") + 1];
    const port = portArg === undefined ? 0 : Number(portArg);
    if (!Number.isInteger(port) || port < 0 || port > 65535) {
      process.stderr.write(`invalid port ${JSON.stringify(portArg)}\n`);
      process.exit(2);
    }
    serveTcp(port);
    return;
  }
  if (args.length === 0 || args.includes("--stdio")) {
    serveStdio();
    return;
  }
  process.stderr.write(`usage: server.js [--stdio | --tcp [port]]\n`);
  process.exit(2);
}

if (require.main === module) {
  main(process.argv);
}
