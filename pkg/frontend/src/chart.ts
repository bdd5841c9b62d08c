/** Progression chart geometry.
 *
 * Pure data-to-coordinates mapping so it can be tested without a DOM. The
 * view renders the result as SVG. The threshold line always comes from the
 * records' own threshold value (the server is free to reconfigure it), never
 * from a constant in this file, and severity colors echo the server's
 * severity strings verbatim: the client does no triage math.
 */

export interface ChartRecord {
  createdAt: string;
  intensity: number;
  severity: string;
  threshold: number;
}

export interface ChartPoint {
  x: number;
  y: number;
  intensity: number;
  severity: string;
  color: string;
  label: string;
}

export interface ChartModel {
  kind: "chart";
  width: number;
  height: number;
  points: ChartPoint[];
  path: string;
  threshold: number;
  thresholdY: number;
  /** Points rendered strictly above the threshold line. */
  aboveThreshold: number;
  yMax: number;
}

export interface EmptyChart {
  kind: "empty";
}

export interface ChartOptions {
  width?: number;
  height?: number;
  padding?: number;
}

const SEVERITY_COLORS: Record<string, string> = {
  Alarming: "#c0392b",
  Mild: "#d69e2e",
  None: "#2f855a",
};
const FALLBACK_COLOR = "#4a5568";

export function severityColor(severity: string): string {
  return SEVERITY_COLORS[severity] ?? FALLBACK_COLOR;
}

export function buildChart(
  records: ChartRecord[],
  options: ChartOptions = {},
): ChartModel | EmptyChart {
  if (records.length === 0) return { kind: "empty" };

  const width = options.width ?? 640;
  const height = options.height ?? 240;
  const pad = options.padding ?? 28;
  const innerWidth = width - 2 * pad;
  const innerHeight = height - 2 * pad;

  const last = records[records.length - 1]!;
  const threshold = last.threshold;

  const top = Math.max(...records.map((r) => r.intensity), threshold);
  // headroom above the tallest feature, clamped to the unit interval
  const yMax = Math.min(1, Math.max(top * 1.25, 0.05));
  const toY = (value: number): number =>
    pad + (1 - value / yMax) * innerHeight;

  const times = records.map((r) => Date.parse(r.createdAt));
  const usable = times.every((t) => Number.isFinite(t));
  const t0 = usable ? Math.min(...times) : 0;
  const t1 = usable ? Math.max(...times) : 0;
  const span = t1 - t0;
  const toX = (index: number): number => {
    if (records.length === 1) return pad + innerWidth / 2;
    if (!usable || span === 0) {
      return pad + (index / (records.length - 1)) * innerWidth;
    }
    return pad + ((times[index]! - t0) / span) * innerWidth;
  };

  const points: ChartPoint[] = records.map((record, i) => ({
    x: round2(toX(i)),
    y: round2(toY(record.intensity)),
    intensity: record.intensity,
    severity: record.severity,
    color: severityColor(record.severity),
    label: record.createdAt,
  }));

  const thresholdY = round2(toY(threshold));
  const path = points
    .map((p, i) => `${i === 0 ? "M" : "L"}${p.x},${p.y}`)
    .join(" ");

  return {
    kind: "chart",
    width,
    height,
    points,
    path,
    threshold,
    thresholdY,
    aboveThreshold: points.filter((p) => p.y < thresholdY).length,
    yMax,
  };
}

function round2(value: number): number {
  return Math.round(value * 100) / 100;
}
