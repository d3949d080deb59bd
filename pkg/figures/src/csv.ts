/**
 * Strict CSV loading for the simulator's output files.
 *
 * Every renderer declares the columns it needs; a missing column or an empty
 * file is a hard error so schema drift fails loudly instead of producing an
 * empty plot.
 */

import { readFileSync } from "node:fs";
import Papa from "papaparse";

export class SchemaError extends Error {}

export interface Table {
  readonly columns: string[];
  readonly rows: number;
  /** Numeric column values in file order. */
  column(name: string): number[];
  /** Raw string column (for categorical fields). */
  text(name: string): string[];
}

class ParsedTable implements Table {
  constructor(
    readonly columns: string[],
    private readonly data: Record<string, string>[],
  ) {}

  get rows(): number {
    return this.data.length;
  }

  private require(name: string): void {
    if (!this.columns.includes(name)) {
      throw new SchemaError(
        `missing column '${name}' (found: ${this.columns.join(", ")})`,
      );
    }
  }

  column(name: string): number[] {
    this.require(name);
    return this.data.map((row, i) => {
      const value = Number(row[name]);
      if (!Number.isFinite(value)) {
        throw new SchemaError(`row ${i + 1}: '${row[name]}' in '${name}' is not a number`);
      }
      return value;
    });
  }

  text(name: string): string[] {
    this.require(name);
    return this.data.map((row) => row[name]);
  }
}

export function parseCsv(content: string): Table {
  const parsed = Papa.parse<Record<string, string>>(content.trim(), {
    header: true,
    skipEmptyLines: true,
    delimiter: ",",
  });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0];
    throw new SchemaError(`CSV parse error: ${first.message} (row ${first.row})`);
  }
  const columns = parsed.meta.fields ?? [];
  if (columns.length === 0 || parsed.data.length === 0) {
    throw new SchemaError("empty CSV input");
  }
  return new ParsedTable(columns, parsed.data);
}

export function loadCsv(path: string): Table {
  return parseCsv(readFileSync(path, "utf-8"));
}

export function requireColumns(table: Table, names: string[]): void {
  for (const name of names) {
    if (!table.columns.includes(name)) {
      throw new SchemaError(
        `missing column '${name}' (found: ${table.columns.join(", ")})`,
      );
    }
  }
}
