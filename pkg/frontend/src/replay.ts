/**
 * Step-through viewer over an engine episode log (the JSONL written by
 * `guandan rollout`). Hands, turn order and the trick target are
 * reconstructed mechanically from the recorded plays, so every panel
 * field that the engine-side `case-study` dump derives from the log
 * comes out identical here. The agent-dependent fields (the legal list
 * and candidate scores) are never computed in the browser: they are
 * overlaid verbatim from a case-study JSON when one is loaded.
 */

import { cardIndex, KIND_NAMES, rankOf } from "./cards.js";
import type { Candidate } from "./protocol.js";

export interface RoundStartEvent {
  event: "round_start";
  round: number;
  level: number;
  team_levels: number[];
  leader: number;
  hands: string[][];
  tribute: {
    annulled: boolean;
    payments: { payer: number; receiver: number; card: string }[];
    returns: { payer: number; receiver: number; card: string }[];
    leader: number;
  } | null;
}

export interface PlayEvent {
  event: "play";
  round: number;
  seat: number;
  combo: string;     // suit-explicit, "Pair:HK SK", or "Pass"
  kind: number;
  key: number;
}

export interface RoundEndEvent {
  event: "round_end";
  round: number;
  finish_order: number[];
  roles: string[];
  winning_team: number;
  promotion: number;
  values: number[];
}

export interface EpisodeEndEvent {
  event: "episode_end";
  winner_team: number | null;
  team_levels: number[];
  rounds: number;
}

export type LogEvent = RoundStartEvent | PlayEvent | RoundEndEvent | EpisodeEndEvent;

/** One decision's display panel; same fields as the case-study dump. */
export interface Panel {
  decision_index: number;
  round: number;
  level: number;
  seat: number;
  history: { seat: number; move: string }[];
  hand: string[];
  remaining_hand_counts: number[];
  to_beat: string | null;
  legal: string[] | null;
  candidates: Candidate[] | null;
  chosen: string;
}

/** The case-study JSON as the CLI writes it. */
export interface CaseStudyJson extends Omit<Panel, "legal" | "candidates"> {
  legal: string[];
  candidates: Candidate[];
}

export function parseLog(text: string): LogEvent[] {
  const events: LogEvent[] = [];
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    let obj: unknown;
    try {
      obj = JSON.parse(line);
    } catch {
      throw new Error(`malformed replay: line ${i + 1} is not JSON`);
    }
    const ev = obj as LogEvent;
    if (!ev || typeof ev !== "object" || typeof ev.event !== "string") {
      throw new Error(`malformed replay: line ${i + 1} has no event field`);
    }
    events.push(ev);
  }
  if (!events.length || events[0].event !== "round_start") {
    throw new Error("malformed replay: no opening round_start");
  }
  return events;
}

function comboTokens(combo: string): string[] {
  const i = combo.indexOf(":");
  return combo.slice(i + 1).split(" ");
}

/** "Pair:HK SK" -> "Pair:KK", matching the short server form. */
function shortCombo(kind: number, tokens: string[]): string {
  return `${KIND_NAMES[kind]}:${tokens.map(rankOf).join("")}`;
}

export class Replay {
  readonly events: LogEvent[];
  readonly decisions: number;
  /** round_end keyed by the index of the round's last decision. */
  readonly banners: Map<number, RoundEndEvent>;
  readonly episodeEnd: EpisodeEndEvent | null;

  constructor(text: string) {
    this.events = parseLog(text);
    let plays = 0;
    this.banners = new Map();
    let end: EpisodeEndEvent | null = null;
    for (const ev of this.events) {
      if (ev.event === "play") plays++;
      else if (ev.event === "round_end") this.banners.set(plays - 1, ev);
      else if (ev.event === "episode_end") end = ev;
    }
    this.decisions = plays;
    this.episodeEnd = end;
  }

  /**
   * Panel for the n-th play of the episode, fields exactly as the
   * engine-side dump derives them. A matching case-study JSON fills in
   * legal and candidates verbatim.
   */
  panel(n: number, sidecar?: CaseStudyJson): Panel {
    if (n < 0 || n >= this.decisions) {
      throw new Error(`decision ${n} not in log (${this.decisions} plays)`);
    }
    const p = this.derive(n);
    if (sidecar) {
      if (sidecar.decision_index !== n) {
        throw new Error(`case study is for decision ${sidecar.decision_index}, not ${n}`);
      }
      if (sidecar.chosen !== p.chosen) {
        throw new Error("case study does not belong to this log");
      }
      p.legal = sidecar.legal;
      p.candidates = sidecar.candidates;
    }
    return p;
  }

  private derive(n: number): Panel {
    let hands: string[][] = [];
    let turn = 0;
    let lastPlay: { seat: number; kind: number; tokens: string[] } | null = null;
    let round = 1;
    let level = 0;
    let history: { seat: number; move: string }[] = [];
    let playsSeen = 0;

    const finished = (s: number) => hands[s].length === 0;

    // engine turn rule: walk from the seat after the player; reaching the
    // last-play seat closes the trick (its partner leads if it finished),
    // otherwise the first seat that still holds cards is up.
    const advance = () => {
      const lastSeat = lastPlay ? lastPlay.seat : null;
      let s = turn;
      for (let i = 0; i < 4; i++) {
        s = (s + 1) % 4;
        if (s === lastSeat) {
          turn = finished(s) ? (s + 2) % 4 : s;
          lastPlay = null;
          return;
        }
        if (!finished(s)) {
          turn = s;
          return;
        }
      }
      throw new Error("malformed replay: no seat can act");
    };

    for (const ev of this.events) {
      if (ev.event === "round_start") {
        hands = ev.hands.map((h) => [...h]);
        turn = ev.leader;
        lastPlay = null;
        round = ev.round;
        level = ev.level;
        history = [];
        continue;
      }
      if (ev.event !== "play") continue;

      if (ev.seat !== turn) {
        throw new Error(`malformed replay: seat ${ev.seat} played out of turn at decision ${playsSeen}`);
      }
      if (playsSeen === n) {
        return {
          decision_index: n,
          round,
          level,
          seat: ev.seat,
          history: history.slice(-12),
          hand: [...hands[ev.seat]].sort((a, b) => cardIndex(a) - cardIndex(b)),
          remaining_hand_counts: hands.map((h) => h.length),
          to_beat: lastPlay ? shortCombo(lastPlay.kind, lastPlay.tokens) : null,
          legal: null,
          candidates: null,
          chosen: ev.combo,
        };
      }
      history.push({ seat: ev.seat, move: ev.combo });
      playsSeen++;

      if (ev.combo === "Pass") {
        advance();
        continue;
      }
      const tokens = comboTokens(ev.combo);
      for (const t of tokens) {
        const at = hands[ev.seat].indexOf(t);
        if (at < 0) throw new Error(`malformed replay: ${t} not in seat ${ev.seat}'s hand`);
        hands[ev.seat].splice(at, 1);
      }
      lastPlay = { seat: ev.seat, kind: ev.kind, tokens };
      const done = [0, 1, 2, 3].filter(finished);
      const teamDone = [0, 1].some((t) => done.filter((s) => s % 2 === t).length === 2);
      if (!teamDone) advance();
    }
    throw new Error(`decision ${n} not in log`);
  }
}
