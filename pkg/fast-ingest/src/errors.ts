/** Stable parse/validation error codes shared with the reference reader. */
export type ErrorCode =
  | "bad_magic"
  | "bad_version"
  | "truncated"
  | "trailing_bytes"
  | "nonmonotonic_timestamp"
  | "out_of_bounds"
  | "bad_polarity"
  | "config_error"
  | "io_error";

export class IngestError extends Error {
  constructor(
    message: string,
    public readonly code: ErrorCode,
    public readonly offset?: number,
  ) {
    super(offset === undefined ? message : `${message} (byte offset ${offset})`);
    this.name = "IngestError";
  }
}
