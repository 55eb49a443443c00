import { describe, expect, test } from "vitest";
import {
  collectRaw, emit, get, isRawNum, num, parseRaw, plain, rawText, symbolList,
} from "../src/jsonraw.js";

// A real canonical snapshot body as the service writes it (sorted keys,
// compact, trailing newline stripped here): floats keep their `.0`.
const CANON =
  '{"absorption":{"estimate":0.0,"high":0.056626022971156334,"horizon":5,' +
  '"low":0.0,"n":64,"seed":21000064},"completion":["a","b","PAD","EOS"],' +
  '"intervention":[],"meaning":"a","model":"070d93acf8c4b840a9c291cff5fb617f' +
  'a2a35dd0c09c7c04cc3cca2655c34a42","schema":"1","t":1,"toxic_score":0.0,' +
  '"turn":1,"window":["PAD","PAD","a","b"]}';

describe("raw preservation", () => {
  test("float literals survive exactly", () => {
    const v = parseRaw('{"a":0.0,"b":1e-07,"c":-2.5e+3,"d":42,"e":0.1}');
    expect(rawText(get(v, "a"))).toBe("0.0");
    expect(rawText(get(v, "b"))).toBe("1e-07");
    expect(rawText(get(v, "c"))).toBe("-2.5e+3");
    expect(rawText(get(v, "d"))).toBe("42");
    expect(num(get(v, "a"))).toBe(0);
    expect(num(get(v, "b"))).toBe(1e-7);
    expect(num(get(v, "c"))).toBe(-2500);
  });

  test("JSON.stringify would have lost these", () => {
    // the reason this module exists
    expect(JSON.stringify(JSON.parse('{"a":0.0}'))).toBe('{"a":0}');
    expect(emit(parseRaw('{"a":0.0}'))).toBe('{"a":0.0}');
  });

  test("emit inverts parse on compact service bodies", () => {
    for (const text of [
      CANON,
      '{"error":{"code":"censored","message":"successor state scores 1 >= 0.5","token":"a","position":0,"score":1.0}}',
      '{"schema":"1","status":"ok"}',
      "[1,2.5,null,true,false]",
      '{"empty":{},"list":[]}',
    ]) {
      expect(emit(parseRaw(text))).toBe(text);
    }
  });

  test("whitespace is accepted on input, not reproduced", () => {
    expect(emit(parseRaw(' { "a" : [ 1 , 2 ] } '))).toBe('{"a":[1,2]}');
  });
});

describe("strings and errors", () => {
  test("escapes decode", () => {
    expect(parseRaw('"a\\"b"')).toBe('a"b');
    expect(parseRaw('"\\n\\t"')).toBe("\n\t");
    expect(parseRaw('"\\u00e9"')).toBe("\u00e9");
  });

  test("malformed input raises", () => {
    expect(() => parseRaw("{")).toThrow(SyntaxError);
    expect(() => parseRaw('{"a":}')).toThrow(SyntaxError);
    expect(() => parseRaw("1 2")).toThrow(/trailing/);
    expect(() => parseRaw("nope")).toThrow(SyntaxError);
    expect(() => parseRaw("[1,]")).toThrow(SyntaxError);
  });
});

describe("helpers", () => {
  const v = parseRaw(CANON);

  test("get walks paths and misses to null", () => {
    expect(rawText(get(v, "absorption", "n"))).toBe("64");
    expect(get(v, "absorption", "nope")).toBeNull();
    expect(get(v, "window", 99)).toBeNull();
    expect(rawText(get(v, "window", 2))).toBe("a");
  });

  test("collectRaw finds every numeric literal in order", () => {
    expect(collectRaw(v)).toEqual([
      "0.0", "0.056626022971156334", "5", "0.0", "64", "21000064",
      "1", "0.0", "1",
    ]);
  });

  test("plain strips raws for logic code", () => {
    const p = plain(v) as { absorption: { n: number }; toxic_score: number };
    expect(p.absorption.n).toBe(64);
    expect(p.toxic_score).toBe(0);
  });

  test("symbolList reads wire symbol arrays", () => {
    expect(symbolList(get(v, "window"))).toEqual(["PAD", "PAD", "a", "b"]);
    expect(symbolList(get(v, "meaning"))).toEqual([]);
  });

  test("isRawNum distinguishes numbers from lookalike objects", () => {
    expect(isRawNum(get(v, "turn"))).toBe(true);
    expect(isRawNum(get(v, "absorption"))).toBe(false);
    expect(isRawNum(parseRaw('{"kind":"num"}'))).toBe(false);
  });
});
