/**
 * Message types for the table server's JSON protocol (see
 * docs/protocol.md in the repository root). Every server message
 * carries the stamp fields; the client answers with the small
 * message builders at the bottom.
 */

export interface Stamp {
  game_id?: string;
  seq?: number;
  seat?: number;
}

export interface SeatInfo {
  index: number;
  kind: "human" | "bot";
  spec?: string;
  connected?: boolean;
}

export interface ComboJson {
  kind: string;
  cards: string[];
  key: number;
}

/** Seat-private snapshot; only our own hand is ever populated. */
export interface ViewJson {
  seat: number;
  hand: string[];
  to_beat: ComboJson | null;
  last_moves: (ComboJson | null)[];
  hand_sizes: number[];
  played: string[][];
  my_level: number;
  opp_level: number;
  current_level: number;
  turn: number;
  trick_leader: number;
  finish_order: number[];
  round_index: number;
}

export interface LegalEntry {
  index: number;
  move: string;      // rank-only text, e.g. "Pair:99"
  cards: string[];   // suit-explicit tokens
  kind: number;
  key: number;
}

export interface Candidate {
  move: string;
  cards?: string;    // suit-explicit text when the agent reports it
  score: number;
  q?: number;
}

export interface MoveDetail {
  seat: number;
  move: string;
  cards: string[];
  kind: number;
  key: number;
}

export interface HelloReply extends Stamp {
  type: "hello";
  you: number;
  seats: SeatInfo[];
}

export interface NewGameMsg extends Stamp {
  type: "new_game";
  round: number;
  level: number;
  team_levels: number[];
  leader: number;
  seats: SeatInfo[];
}

export interface StateMsg extends Stamp {
  type: "state";
  view: ViewJson;
  turn: number;
  last_move: MoveDetail | null;
}

export interface BotMoveMsg extends Omit<Stamp, "seat">, MoveDetail {
  type: "bot_move";
  candidates?: Candidate[];
  chosen?: string;
}

export interface LegalActionsMsg extends Stamp {
  type: "legal_actions";
  legal: LegalEntry[];
  view: ViewJson;
}

export interface RoundEndMsg extends Stamp {
  type: "round_end";
  roles: string[];
  winning_team: number;
  promotion: number;
  finish_order: number[];
  team_levels: number[];
}

export interface TributePayment {
  payer: number;
  receiver: number;
  card: string;
}

export interface TributeInfoMsg extends Stamp {
  type: "tribute_info";
  annulled: boolean;
  payments: TributePayment[];
  returns: TributePayment[];
  leader: number;
  round: number;
}

export interface TributePromptMsg extends Stamp {
  type: "tribute_prompt";
  payer: number;
  hand: string[];
  options: string[];
}

export interface EpisodeEndMsg extends Stamp {
  type: "episode_end";
  winner_team: number | null;
  team_levels: number[];
  rounds: number;
}

export interface PingMsg extends Stamp {
  type: "ping";
}

export interface ErrorMsg extends Stamp {
  type: "error";
  code: string;
  message?: string;
  /** illegal_action only: short text of the still-valid legal combos. */
  legal?: string[];
  /** illegal_return only: the valid return cards. */
  options?: string[];
}

export type ServerMessage =
  | HelloReply
  | NewGameMsg
  | StateMsg
  | BotMoveMsg
  | LegalActionsMsg
  | RoundEndMsg
  | TributeInfoMsg
  | TributePromptMsg
  | EpisodeEndMsg
  | PingMsg
  | ErrorMsg;

const SERVER_TYPES = new Set([
  "hello", "new_game", "state", "bot_move", "legal_actions", "round_end",
  "tribute_info", "tribute_prompt", "episode_end", "ping", "error",
]);

/** Parse one frame/line; null for anything we do not recognise. */
export function parseServer(raw: string): ServerMessage | null {
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof obj !== "object" || obj === null) return null;
  const t = (obj as { type?: unknown }).type;
  if (typeof t !== "string" || !SERVER_TYPES.has(t)) return null;
  return obj as ServerMessage;
}

// -- client -> server ------------------------------------------------------

export function helloMsg(seat?: number): string {
  return JSON.stringify(seat === undefined ? { type: "hello" } : { type: "hello", seat });
}

export function actByIndex(index: number): string {
  return JSON.stringify({ type: "act", index });
}

export function actByCards(cards: string[], kind?: number): string {
  return JSON.stringify(
    kind === undefined ? { type: "act", cards } : { type: "act", cards, kind });
}

export function tributeReturnMsg(card: string): string {
  return JSON.stringify({ type: "tribute_return", card });
}

export function pongMsg(): string {
  return JSON.stringify({ type: "pong" });
}

export function newGameMsg(): string {
  return JSON.stringify({ type: "new_game" });
}
