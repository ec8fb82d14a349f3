import { describe, expect, it } from "vitest";
import {
  BJ_INDEX, RJ_INDEX, KIND_NAMES, cardIndex, cardToken, isJoker, isRed,
  rankOf, ranksText, sameCards, sortTokens,
} from "../src/cards.js";

describe("card tokens", () => {
  it("round-trips all 54 indices", () => {
    for (let i = 0; i < 54; i++) {
      expect(cardIndex(cardToken(i))).toBe(i);
    }
  });

  it("matches the server ordering", () => {
    // rank-major, suits H S D C, jokers on top
    expect(cardIndex("H2")).toBe(0);
    expect(cardIndex("S2")).toBe(1);
    expect(cardIndex("D2")).toBe(2);
    expect(cardIndex("C2")).toBe(3);
    expect(cardIndex("H3")).toBe(4);
    expect(cardIndex("HA")).toBe(48);
    expect(cardIndex("BJ")).toBe(BJ_INDEX);
    expect(cardIndex("RJ")).toBe(RJ_INDEX);
  });

  it("rejects garbage", () => {
    expect(() => cardIndex("T5")).toThrow();
    expect(() => cardIndex("H1")).toThrow();
    expect(() => cardIndex("")).toThrow();
  });

  it("handles three-character ten tokens", () => {
    expect(cardToken(cardIndex("H10"))).toBe("H10");
    expect(rankOf("S10")).toBe("10");
  });

  it("rankOf keeps joker tokens whole", () => {
    expect(rankOf("BJ")).toBe("BJ");
    expect(rankOf("RJ")).toBe("RJ");
    expect(rankOf("DQ")).toBe("Q");
  });
});

describe("helpers", () => {
  it("sortTokens gives server order without mutating", () => {
    const mixed = ["RJ", "H2", "CK", "S5"];
    expect(sortTokens(mixed)).toEqual(["H2", "S5", "CK", "RJ"]);
    expect(mixed[0]).toBe("RJ");
  });

  it("sameCards is multiset equality", () => {
    expect(sameCards(["SK", "HK"], ["HK", "SK"])).toBe(true);
    // duplicates are distinct physical cards in a 108-card deck
    expect(sameCards(["H5", "H5"], ["H5", "S5"])).toBe(false);
    expect(sameCards(["H5"], ["H5", "H5"])).toBe(false);
    expect(sameCards([], [])).toBe(true);
  });

  it("ranksText reproduces the short-form combo text", () => {
    expect(ranksText(["SK", "CK"])).toBe("KK");
    expect(ranksText(["S10", "H10"])).toBe("1010");
    expect(ranksText(["BJ", "BJ", "RJ", "RJ"])).toBe("BJBJRJRJ");
  });

  it("red suits and jokers", () => {
    expect(isRed("H4")).toBe(true);
    expect(isRed("D4")).toBe(true);
    expect(isRed("S4")).toBe(false);
    expect(isRed("RJ")).toBe(true);
    expect(isRed("BJ")).toBe(false);
    expect(isJoker("BJ")).toBe(true);
    expect(isJoker("H2")).toBe(false);
  });

  it("kind names line up with the wire integers", () => {
    expect(KIND_NAMES).toHaveLength(11);
    expect(KIND_NAMES[0]).toBe("Pass");
    expect(KIND_NAMES[2]).toBe("Pair");
    expect(KIND_NAMES[8]).toBe("Bomb");
    expect(KIND_NAMES[10]).toBe("JokerBomb");
  });
});
