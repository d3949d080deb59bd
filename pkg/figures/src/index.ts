export { SchemaError, loadCsv, parseCsv } from "./csv.js";
export type { Table } from "./csv.js";
export { checksumArrays } from "./checksum.js";
export {
  renderCascade,
  renderDensity,
  renderDwell,
  renderTrajectory,
} from "./render.js";
export type { RenderResult } from "./render.js";
