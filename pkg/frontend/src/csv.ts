import { existsSync, readFileSync } from "fs";

/** One ladder level of a convergence study CSV. */
export interface ConvergenceRow {
  level: number;
  h: number;
  k: number;
  N: number;
  error: number;
  se: number;
  samples: number;
}

export const REQUIRED_COLUMNS = ["level", "h", "k", "N", "error", "se", "samples"] as const;

export type XColumn = "h" | "k" | "N";

/** Rate fit recorded by the study runner alongside the CSV. */
export interface RateFit {
  rate: number;
  half_width: number;
  intercept: number;
}

/** Sidecar metadata written next to each study CSV (`<stem>.meta.json`). */
export interface RunMeta {
  kind?: string;
  axis?: string;
  fit?: RateFit;
  config?: Record<string, unknown>;
  [key: string]: unknown;
}

/**
 * Read a convergence-study CSV (columns level,h,k,N,error,se,samples).
 * Throws on a missing file, a missing required column, an empty file,
 * or a non-numeric cell; this module never writes or repairs its inputs.
 */
export function readConvergenceCsv(filePath: string): ConvergenceRow[] {
  const text = readFileSync(filePath, "utf8").trim();
  if (text === "") {
    throw new Error(`empty CSV: ${filePath}`);
  }
  const lines = text.split(/\r?\n/).filter((line) => line.trim() !== "");
  const header = lines[0].split(",").map((name) => name.trim());
  for (const column of REQUIRED_COLUMNS) {
    if (!header.includes(column)) {
      throw new Error(`missing column "${column}" in ${filePath} (header: ${header.join(",")})`);
    }
  }
  if (lines.length < 2) {
    throw new Error(`no data rows in ${filePath}`);
  }
  const index = new Map(REQUIRED_COLUMNS.map((column) => [column, header.indexOf(column)]));
  return lines.slice(1).map((line, rowNumber) => {
    const cells = line.split(",");
    const cell = (column: (typeof REQUIRED_COLUMNS)[number]): number => {
      const value = Number(cells[index.get(column)!]);
      if (!Number.isFinite(value)) {
        throw new Error(`non-numeric "${column}" on data row ${rowNumber + 1} of ${filePath}`);
      }
      return value;
    };
    return {
      level: cell("level"),
      h: cell("h"),
      k: cell("k"),
      N: cell("N"),
      error: cell("error"),
      se: cell("se"),
      samples: cell("samples"),
    };
  });
}

/** Path of the JSON sidecar the study runner writes next to a CSV. */
export function sidecarPath(csvPath: string): string {
  return csvPath.replace(/\.csv$/i, "") + ".meta.json";
}

/**
 * Read the sidecar metadata for a CSV, if present. Returns null (with a
 * warning for an unreadable sidecar) rather than failing the plot: the
 * sidecar only enriches labels, the CSV alone is enough to draw.
 */
export function readRunMeta(csvPath: string): RunMeta | null {
  const metaPath = sidecarPath(csvPath);
  if (!existsSync(metaPath)) {
    return null;
  }
  try {
    return JSON.parse(readFileSync(metaPath, "utf8")) as RunMeta;
  } catch (err) {
    console.warn(`ignoring unreadable sidecar ${metaPath}: ${String(err)}`);
    return null;
  }
}
