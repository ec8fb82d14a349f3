/**
 * Client-side table state: a reducer over server messages plus the
 * selection pre-validation. The server stays authoritative for every
 * rule decision; the only "legality" the client ever computes is
 * multiset equality of the picked cards against the server's own
 * legal_actions list.
 */

import { sameCards } from "./cards.js";
import type {
  BotMoveMsg, EpisodeEndMsg, ErrorMsg, LegalEntry, MoveDetail,
  RoundEndMsg, SeatInfo, ServerMessage, TributeInfoMsg, TributePromptMsg,
  ViewJson,
} from "./protocol.js";

export interface TableState {
  you: number | null;
  seats: SeatInfo[];
  gameId: string | null;
  lastSeq: number;
  round: number;
  level: number;
  teamLevels: number[];
  view: ViewJson | null;
  turn: number | null;
  /** Non-null exactly while the server is waiting on our act. */
  legal: LegalEntry[] | null;
  lastMove: MoveDetail | null;
  botMoves: (BotMoveMsg | null)[];
  tribute: TributeInfoMsg | null;
  tributePrompt: TributePromptMsg | null;
  roundEnd: RoundEndMsg | null;
  episodeEnd: EpisodeEndMsg | null;
  lastError: ErrorMsg | null;
  feed: string[];
}

export function initialState(): TableState {
  return {
    you: null,
    seats: [],
    gameId: null,
    lastSeq: -1,
    round: 0,
    level: 0,
    teamLevels: [0, 0],
    view: null,
    turn: null,
    legal: null,
    lastMove: null,
    botMoves: [null, null, null, null],
    tribute: null,
    tributePrompt: null,
    roundEnd: null,
    episodeEnd: null,
    lastError: null,
    feed: [],
  };
}

function feed(st: TableState, line: string) {
  st.feed.push(line);
  if (st.feed.length > 200) st.feed.splice(0, st.feed.length - 200);
}

/**
 * Fold one server message into the state. Ordering comes from the
 * server's seq stamps: anything at or below the last applied seq is a
 * stale duplicate and is dropped (a fresh game_id resets the counter,
 * e.g. after a server restart).
 */
export function apply(st: TableState, msg: ServerMessage): TableState {
  if (msg.seq !== undefined) {
    if (msg.seq <= st.lastSeq && msg.game_id === st.gameId) return st;
    st.lastSeq = msg.seq;
  }
  if (msg.game_id !== undefined) st.gameId = msg.game_id;

  switch (msg.type) {
    case "hello":
      st.you = msg.you;
      st.seats = msg.seats;
      feed(st, `seated at ${msg.you}`);
      break;

    case "new_game":
      st.round = msg.round;
      st.level = msg.level;
      st.teamLevels = msg.team_levels;
      st.seats = msg.seats.length ? msg.seats : st.seats;
      st.legal = null;
      st.lastMove = null;
      st.tributePrompt = null;
      st.episodeEnd = msg.round === 1 ? null : st.episodeEnd;
      if (msg.round === 1) {
        st.roundEnd = null;
        st.tribute = null;
        st.botMoves = [null, null, null, null];
      }
      feed(st, `round ${msg.round} starts, level ${msg.level}, seat ${msg.leader} leads`);
      break;

    case "state":
      st.view = msg.view;
      st.turn = msg.turn;
      st.lastMove = msg.last_move;
      st.tributePrompt = null;
      if (st.you === null || msg.turn !== st.you) st.legal = null;
      if (msg.last_move) feed(st, `seat ${msg.last_move.seat}: ${msg.last_move.move}`);
      break;

    case "bot_move":
      st.botMoves[msg.seat] = msg;
      break;

    case "legal_actions":
      st.legal = msg.legal;
      st.view = msg.view;
      st.turn = msg.view.turn;
      feed(st, `your turn (${msg.legal.length} legal actions)`);
      break;

    case "round_end":
      st.roundEnd = msg;
      st.teamLevels = msg.team_levels;
      st.legal = null;
      feed(st, `round ends: team ${msg.winning_team} up ${msg.promotion}`);
      break;

    case "tribute_info":
      st.tribute = msg;
      if (msg.annulled) feed(st, "tribute annulled (two red jokers)");
      else for (const p of msg.payments) feed(st, `tribute: seat ${p.payer} gives ${p.card} to seat ${p.receiver}`);
      break;

    case "tribute_prompt":
      st.tributePrompt = msg;
      feed(st, "choose a card to give back");
      break;

    case "episode_end":
      st.episodeEnd = msg;
      st.legal = null;
      feed(st, msg.winner_team === null
        ? "episode over: round cap reached"
        : `episode over: team ${msg.winner_team} wins`);
      break;

    case "error":
      // the server keeps the rejected prompt in force, so st.legal and
      // st.tributePrompt stay as they were; options is refreshed because
      // it has the same card-token shape as the prompt's own list
      st.lastError = msg;
      if (msg.code === "illegal_return" && st.tributePrompt && msg.options) {
        st.tributePrompt = { ...st.tributePrompt, options: msg.options };
      }
      feed(st, `server: ${msg.code}${msg.message ? ` (${msg.message})` : ""}`);
      break;

    case "ping":
      break;
  }
  return st;
}

// -- selection pre-validation ------------------------------------------------

/** Legal entries whose cards equal the selection as a multiset. */
export function matchSelection(selection: string[], legal: LegalEntry[]): LegalEntry[] {
  return legal.filter((e) => e.kind !== 0 && sameCards(e.cards, selection));
}

/** The Pass entry when passing is allowed right now. */
export function passEntry(legal: LegalEntry[]): LegalEntry | null {
  return legal.find((e) => e.kind === 0) ?? null;
}

/**
 * What the current selection could be submitted as. Empty unless it is
 * our turn, the server has asked, and the exact cards appear in its
 * legal list (several entries when the same cards read as different
 * combos; the UI then offers the kind choice).
 */
export function submittable(st: TableState, selection: string[]): LegalEntry[] {
  if (st.you === null || st.legal === null || st.turn !== st.you) return [];
  if (selection.length === 0) return [];
  return matchSelection(selection, st.legal);
}
