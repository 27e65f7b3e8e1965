import { existsSync, mkdtempSync, readFileSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";
import { fileURLToPath } from "url";
import { afterEach, describe, expect, it, vi } from "vitest";
import { readConvergenceCsv, readRunMeta } from "../src/csv.js";
import { renderConvergence } from "../src/plot.js";

const fixture = (name: string) => fileURLToPath(new URL(`./fixtures/${name}`, import.meta.url));
const outDir = () => mkdtempSync(join(tmpdir(), "convergence-plots-"));

const HEADER = "level,h,k,N,error,se,samples";

afterEach(() => {
  vi.restoreAllMocks();
});

describe("renderConvergence smoke", () => {
  it("renders one figure from a study CSV with slope overlay and fitted-rate legend", () => {
    const out = join(outDir(), "she_wz");
    const result = renderConvergence({
      inputs: [fixture("she_wz_h03.csv")],
      output: out,
      slopes: [0.3],
    });
    expect(existsSync(result.svgPath)).toBe(true);
    expect(existsSync(result.pngPath)).toBe(true);
    expect(result.seriesCount).toBe(1); // series count matches input count
    expect(result.slopeCount).toBe(1);
    expect(result.pointCounts).toEqual([4]);

    const svg = readFileSync(result.svgPath, "utf8");
    expect(svg.match(/class="series"/g)?.length).toBe(1);
    expect(svg.match(/class="ref-slope"/g)?.length).toBe(1);
    expect(svg).toContain("reference slope 0.3");
    expect(svg).toContain("fit 0.370"); // fitted rate from the sidecar, not recomputed
  });

  it("overlays two CSVs as two series with two reference slopes", () => {
    const out = join(outDir(), "overlay.svg");
    const result = renderConvergence({
      inputs: [fixture("she_wz_h03.csv"), fixture("she_wz_h05.csv")],
      output: out,
    });
    expect(result.seriesCount).toBe(2);
    expect(result.slopeCount).toBe(2);

    const svg = readFileSync(result.svgPath, "utf8");
    expect(svg.match(/class="series"/g)?.length).toBe(2);
    expect(svg.match(/class="ref-slope"/g)?.length).toBe(2);
    // slopes default to each run's configured target rate
    expect(svg).toContain("reference slope 0.3");
    expect(svg).toContain("reference slope 0.5");
  });

  it("is deterministic: rendering the same spec twice gives identical SVG bytes", () => {
    const dir = outDir();
    const a = renderConvergence({ inputs: [fixture("she_wz_h03.csv")], output: join(dir, "a") });
    const b = renderConvergence({ inputs: [fixture("she_wz_h03.csv")], output: join(dir, "b") });
    expect(readFileSync(a.svgPath, "utf8")).toBe(readFileSync(b.svgPath, "utf8"));
  });
});

describe("degenerate inputs", () => {
  it("omits a zero-error point with a warning instead of crashing", () => {
    const dir = outDir();
    const csv = join(dir, "with_zero.csv");
    writeFileSync(
      csv,
      [HEADER, "0,0.25,0.0625,64,0.1,0.01,50", "1,0.125,0.015625,64,0,0,50", "2,0.0625,0.00390625,64,0.05,0.005,50"].join(
        "\n",
      ),
    );
    const warn = vi.spyOn(console, "warn").mockImplementation(() => {});
    const result = renderConvergence({ inputs: [csv], output: join(dir, "fig"), slopes: [0.3] });
    expect(result.pointCounts).toEqual([2]);
    expect(warn).toHaveBeenCalledOnce();
    expect(String(warn.mock.calls[0][0])).toContain("level 1");
  });

  it("rejects a CSV with a required column missing", () => {
    const dir = outDir();
    const csv = join(dir, "no_error_col.csv");
    writeFileSync(csv, ["level,h,k,N,se,samples", "0,0.25,0.0625,64,0.01,50"].join("\n"));
    expect(() => renderConvergence({ inputs: [csv], output: join(dir, "fig") })).toThrow(/missing column "error"/);
  });

  it("rejects an empty CSV and a header-only CSV", () => {
    const dir = outDir();
    const empty = join(dir, "empty.csv");
    writeFileSync(empty, "");
    expect(() => renderConvergence({ inputs: [empty], output: join(dir, "fig") })).toThrow(/empty CSV/);

    const headerOnly = join(dir, "header_only.csv");
    writeFileSync(headerOnly, HEADER + "\n");
    expect(() => renderConvergence({ inputs: [headerOnly], output: join(dir, "fig") })).toThrow(/no data rows/);
  });

  it("rejects a CSV whose every error value is unplottable", () => {
    const dir = outDir();
    const csv = join(dir, "all_zero.csv");
    writeFileSync(csv, [HEADER, "0,0.25,0.0625,64,0,0,50"].join("\n"));
    vi.spyOn(console, "warn").mockImplementation(() => {});
    expect(() => renderConvergence({ inputs: [csv], output: join(dir, "fig") })).toThrow(/no plottable data/);
  });

  it("rejects a slope list that matches neither one nor the input count", () => {
    expect(() =>
      renderConvergence({
        inputs: [fixture("she_wz_h03.csv"), fixture("she_wz_h05.csv")],
        output: join(outDir(), "fig"),
        slopes: [0.1, 0.2, 0.3],
      }),
    ).toThrow(/reference slopes/);
  });
});

describe("CSV + sidecar readers", () => {
  it("parses the study CSV schema", () => {
    const rows = readConvergenceCsv(fixture("she_wz_h03.csv"));
    expect(rows.length).toBe(4);
    expect(rows[0].h).toBeCloseTo(0.125, 12);
    expect(rows[rows.length - 1].samples).toBe(200);
    expect(rows.every((r) => r.error > 0 && r.se > 0)).toBe(true);
  });

  it("reads the fitted rate from the sidecar and returns null without one", () => {
    const meta = readRunMeta(fixture("she_wz_h03.csv"));
    expect(meta?.axis).toBe("h");
    expect(meta?.fit?.rate).toBeGreaterThan(0.2);
    expect(meta?.fit?.rate).toBeLessThan(0.4);

    const dir = outDir();
    const bare = join(dir, "bare.csv");
    writeFileSync(bare, [HEADER, "0,0.25,0.0625,64,0.1,0.01,50"].join("\n"));
    expect(readRunMeta(bare)).toBeNull();
  });
});
