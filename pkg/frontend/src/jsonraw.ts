/*
 * Raw-preserving JSON reader.
 *
 * The console's contract is that every number it shows is the service's
 * number, byte for byte.  JavaScript cannot honor that through JSON.parse:
 * the wire text `0.0` parses to the double 0 and re-renders as `"0"`, and
 * `1e-07` comes back as `"1e-7"`.  So we parse service bodies ourselves and
 * keep, for every numeric literal, both the double (for logic: gauge widths,
 * comparisons) and the exact source text (for display and for equality
 * checks against the wire).
 *
 * The grammar is plain JSON.  `emit` is the inverse on compact input: for
 * any body the service produces (no insignificant whitespace),
 * emit(parse(text)) === text, which the tests use as a self-check.
 */

export interface RawNum {
  kind: "num";
  num: number;
  raw: string;
}

export type JValue = null | boolean | string | RawNum | JValue[] | JObject;

export interface JObject {
  [key: string]: JValue;
}

export function isRawNum(v: JValue): v is RawNum {
  return typeof v === "object" && v !== null && !Array.isArray(v) &&
    (v as RawNum).kind === "num" && typeof (v as RawNum).raw === "string";
}

export function isObject(v: JValue): v is JObject {
  return typeof v === "object" && v !== null && !Array.isArray(v) && !isRawNum(v);
}

const NUM_RE = /-?(?:0|[1-9]\d*)(?:\.\d+)?(?:[eE][+-]?\d+)?/y;
const WS = new Set([" ", "\t", "\n", "\r"]);

class Parser {
  private i = 0;
  constructor(private readonly s: string) {}

  parse(): JValue {
    const v = this.value();
    this.ws();
    if (this.i !== this.s.length) this.fail("trailing characters");
    return v;
  }

  private fail(msg: string): never {
    throw new SyntaxError(`bad JSON at offset ${this.i}: ${msg}`);
  }

  private ws(): void {
    while (this.i < this.s.length && WS.has(this.s[this.i])) this.i++;
  }

  private value(): JValue {
    this.ws();
    const c = this.s[this.i];
    if (c === undefined) this.fail("unexpected end");
    if (c === "{") return this.object();
    if (c === "[") return this.array();
    if (c === '"') return this.string();
    if (c === "t" || c === "f" || c === "n") return this.word();
    NUM_RE.lastIndex = this.i;
    const m = NUM_RE.exec(this.s);
    if (m === null || m.index !== this.i) this.fail(`unexpected ${JSON.stringify(c)}`);
    this.i += m[0].length;
    return { kind: "num", num: Number(m[0]), raw: m[0] };
  }

  private word(): JValue {
    for (const [w, v] of [["true", true], ["false", false], ["null", null]] as const) {
      if (this.s.startsWith(w, this.i)) {
        this.i += w.length;
        return v;
      }
    }
    this.fail("unknown literal");
  }

  private string(): string {
    // Lean on JSON.parse for escape handling; just find the closing quote.
    const start = this.i;
    this.i++;
    while (this.i < this.s.length) {
      const c = this.s[this.i];
      if (c === "\\") this.i += 2;
      else if (c === '"') {
        this.i++;
        return JSON.parse(this.s.slice(start, this.i)) as string;
      } else this.i++;
    }
    this.fail("unterminated string");
  }

  private array(): JValue[] {
    this.i++; // [
    const out: JValue[] = [];
    this.ws();
    if (this.s[this.i] === "]") {
      this.i++;
      return out;
    }
    for (;;) {
      out.push(this.value());
      this.ws();
      const c = this.s[this.i];
      if (c === ",") this.i++;
      else if (c === "]") {
        this.i++;
        return out;
      } else this.fail("expected , or ] in array");
    }
  }

  private object(): JObject {
    this.i++; // {
    const out: JObject = {};
    this.ws();
    if (this.s[this.i] === "}") {
      this.i++;
      return out;
    }
    for (;;) {
      this.ws();
      if (this.s[this.i] !== '"') this.fail("expected object key");
      const key = this.string();
      this.ws();
      if (this.s[this.i] !== ":") this.fail("expected :");
      this.i++;
      out[key] = this.value();
      this.ws();
      const c = this.s[this.i];
      if (c === ",") this.i++;
      else if (c === "}") {
        this.i++;
        return out;
      } else this.fail("expected , or } in object");
    }
  }
}

export function parseRaw(text: string): JValue {
  return new Parser(text).parse();
}

/** Compact re-serialization reusing the captured numeric literals. */
export function emit(v: JValue): string {
  if (v === null) return "null";
  if (typeof v === "boolean") return v ? "true" : "false";
  if (typeof v === "string") return JSON.stringify(v);
  if (isRawNum(v)) return v.raw;
  if (Array.isArray(v)) return "[" + v.map(emit).join(",") + "]";
  return "{" + Object.entries(v).map(([k, x]) => JSON.stringify(k) + ":" + emit(x)).join(",") + "}";
}

// --- small access helpers -------------------------------------------------

/** Field lookup along a path of keys/indices; null when anything is missing. */
export function get(v: JValue, ...path: (string | number)[]): JValue {
  let cur: JValue = v;
  for (const p of path) {
    if (typeof p === "number") {
      if (!Array.isArray(cur) || p >= cur.length) return null;
      cur = cur[p];
    } else {
      if (!isObject(cur) || !(p in cur)) return null;
      cur = cur[p];
    }
  }
  return cur;
}

/** The double behind a numeric field (NaN when absent/non-numeric). */
export function num(v: JValue): number {
  return isRawNum(v) ? v.num : NaN;
}

/**
 * Display text for a leaf: the wire literal for numbers, the bare text for
 * strings, JSON for everything else.  Never reformats a numeric.
 */
export function rawText(v: JValue): string {
  if (isRawNum(v)) return v.raw;
  if (typeof v === "string") return v;
  return emit(v);
}

/** Every numeric literal in a tree, in document order (for display audits). */
export function collectRaw(v: JValue, out: string[] = []): string[] {
  if (isRawNum(v)) out.push(v.raw);
  else if (Array.isArray(v)) for (const x of v) collectRaw(x, out);
  else if (isObject(v)) for (const x of Object.values(v)) collectRaw(x, out);
  return out;
}

/** Plain JavaScript value (numbers as doubles) for code that does logic. */
export function plain(v: JValue): unknown {
  if (isRawNum(v)) return v.num;
  if (Array.isArray(v)) return v.map(plain);
  if (isObject(v)) {
    const out: { [k: string]: unknown } = {};
    for (const [k, x] of Object.entries(v)) out[k] = plain(x);
    return out;
  }
  return v;
}

/** Decode a wire array of token symbols into strings. */
export function symbolList(v: JValue): string[] {
  if (!Array.isArray(v)) return [];
  return v.map((x) => (typeof x === "string" ? x : rawText(x)));
}
