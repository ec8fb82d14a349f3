/**
 * Card tokens as they appear on the wire: a suit letter followed by the
 * rank name ("S3", "H10", "DA"), plus "BJ"/"RJ" for the jokers. The
 * numeric index matches the server's ordering (rank-major, suits HSDC,
 * jokers 52/53), so sorting by index reproduces server-sorted hands.
 */

export const SUITS = "HSDC";
export const RANKS = ["2", "3", "4", "5", "6", "7", "8", "9", "10", "J", "Q", "K", "A"];

export const SUIT_GLYPH: Record<string, string> = {
  H: "♥", S: "♠", D: "♦", C: "♣",
};

export const BJ_INDEX = 52;
export const RJ_INDEX = 53;

export function cardIndex(token: string): number {
  if (token === "BJ") return BJ_INDEX;
  if (token === "RJ") return RJ_INDEX;
  const suit = SUITS.indexOf(token[0]);
  const rank = RANKS.indexOf(token.slice(1));
  if (suit < 0 || rank < 0) throw new Error(`bad card token: ${token}`);
  return rank * 4 + suit;
}

export function cardToken(index: number): string {
  if (index === BJ_INDEX) return "BJ";
  if (index === RJ_INDEX) return "RJ";
  return SUITS[index % 4] + RANKS[Math.floor(index / 4)];
}

export function isJoker(token: string): boolean {
  return token === "BJ" || token === "RJ";
}

export function isRed(token: string): boolean {
  return token === "RJ" || token[0] === "H" || token[0] === "D";
}

/** "S10" -> "10", "BJ" -> "BJ". */
export function rankOf(token: string): string {
  return isJoker(token) ? token : token.slice(1);
}

export function sortTokens(tokens: string[]): string[] {
  return [...tokens].sort((a, b) => cardIndex(a) - cardIndex(b));
}

/** Order-free multiset equality of two token lists. */
export function sameCards(a: string[], b: string[]): boolean {
  if (a.length !== b.length) return false;
  const sa = sortTokens(a);
  const sb = sortTokens(b);
  return sa.every((t, i) => t === sb[i]);
}

/**
 * Rank-only display form of a suit-explicit token list, matching the
 * server's short combo text ("Pair:KK" for ["SK", "CK"]). Tokens must
 * already be in server order.
 */
export function ranksText(tokens: string[]): string {
  return tokens.map(rankOf).join("");
}

export const KIND_NAMES = [
  "Pass", "Single", "Pair", "Triple", "Tube", "Plate", "FullHouse",
  "Straight", "Bomb", "StraightFlush", "JokerBomb",
];
