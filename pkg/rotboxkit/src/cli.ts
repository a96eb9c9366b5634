// ── Process plumbing: every operation is one rotbox CLI invocation ──

import { execFile } from "node:child_process";
import { mkdtemp, rm } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join } from "node:path";

/**
 * Raised when the CLI exits nonzero.  The core prints a single
 * `error code=<slug>: <message>` line on stderr; `code` carries the slug
 * (`invalid-box`, `format-error`, `decode-overflow`, `usage`, ...) so
 * callers can branch without string matching.
 */
export class CliError extends Error {
  readonly code: string;

  constructor(code: string, message: string) {
    super(message);
    this.name = "CliError";
    this.code = code;
  }
}

const ERROR_LINE = /^error code=([a-z-]+):\s*(.*)$/m;

/**
 * The command invoked for every operation, as argv.  Override with the
 * `ROTBOX_CLI` environment variable (whitespace-separated), e.g.
 * `ROTBOX_CLI="python3 -m rotbox"` or `ROTBOX_CLI=/usr/local/bin/rotbox`.
 */
export function cliCommand(): string[] {
  const override = process.env.ROTBOX_CLI;
  const argv = override ? override.split(/\s+/).filter(Boolean) : ["python3", "-m", "rotbox"];
  if (argv.length === 0) {
    throw new CliError("config-error", "ROTBOX_CLI is set but empty");
  }
  return argv;
}

/**
 * Run one subcommand and return its stdout.  Fully asynchronous: the
 * kernel executes in a child process, so concurrent calls proceed in
 * parallel and never block the event loop.
 */
export function runCli(args: string[]): Promise<string> {
  const [cmd, ...prefix] = cliCommand();
  return new Promise((resolve, reject) => {
    execFile(
      cmd as string,
      [...prefix, ...args],
      { maxBuffer: 256 * 1024 * 1024 },
      (error, stdout, stderr) => {
        if (error) {
          const match = ERROR_LINE.exec(stderr);
          if (match) {
            reject(new CliError(match[1] as string, match[2] as string));
          } else {
            reject(new CliError("error", stderr.trim() || error.message));
          }
          return;
        }
        resolve(stdout);
      },
    );
  });
}

/** Run one subcommand and parse its stdout as a rotbox/1 JSON document. */
export async function runCliJson(args: string[]): Promise<any> {
  const stdout = await runCli(args);
  return JSON.parse(stdout);
}

/**
 * Create a scratch directory, hand it to `body`, and remove it afterwards
 * whether or not `body` throws.
 */
export async function withScratchDir<T>(body: (dir: string) => Promise<T>): Promise<T> {
  const dir = await mkdtemp(join(tmpdir(), "rotboxkit-"));
  try {
    return await body(dir);
  } finally {
    await rm(dir, { recursive: true, force: true });
  }
}
