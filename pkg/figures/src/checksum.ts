/**
 * Data checksum for the render-fidelity invariant: the renderer exposes the
 * arrays it plotted, and their checksum must equal the checksum of the CSV
 * columns they came from (rendering may scale coordinates, never values).
 */

import { createHash } from "node:crypto";

export function checksumArrays(arrays: readonly (readonly number[])[]): string {
  const hash = createHash("sha256");
  for (const arr of arrays) {
    hash.update(Buffer.from(Float64Array.from(arr).buffer));
  }
  return hash.digest("hex");
}
