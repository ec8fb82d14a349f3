/**
 * DOM builders. Everything here renders server-provided data; nothing
 * invents game facts. Builders return fresh elements and the caller
 * swaps them into the page.
 */

import { isRed, rankOf, SUIT_GLYPH, isJoker } from "./cards.js";
import type { BotMoveMsg, LegalEntry, SeatInfo, ViewJson } from "./protocol.js";
import type { Panel } from "./replay.js";

export function cardEl(token: string, opts: {
  selected?: boolean;
  small?: boolean;
  onClick?: (token: string) => void;
} = {}): HTMLElement {
  const el = document.createElement("div");
  el.className = "card" + (isRed(token) ? " red" : "")
    + (opts.selected ? " selected" : "") + (opts.small ? " small" : "");
  el.dataset.token = token;

  const rank = document.createElement("span");
  rank.className = "rank";
  rank.textContent = isJoker(token) ? (token === "RJ" ? "JOKER" : "joker") : rankOf(token);
  el.appendChild(rank);

  if (!isJoker(token)) {
    const suit = document.createElement("span");
    suit.className = "suit";
    suit.textContent = SUIT_GLYPH[token[0]];
    el.appendChild(suit);
  }
  if (opts.onClick) el.addEventListener("click", () => opts.onClick!(token));
  return el;
}

/**
 * The human's hand. Duplicate tokens are distinct physical cards, so
 * selection is positional: `selected` holds indices into `tokens`.
 */
export function handRow(tokens: string[], selected: Set<number>,
                        onToggle: (pos: number) => void): HTMLElement {
  const row = document.createElement("div");
  row.className = "hand";
  tokens.forEach((t, pos) => {
    const el = cardEl(t, { selected: selected.has(pos) });
    el.dataset.pos = String(pos);
    el.addEventListener("click", () => onToggle(pos));
    row.appendChild(el);
  });
  return row;
}

export function seatPanel(info: SeatInfo, opts: {
  you: boolean;
  handSize: number;
  lastMove: string | null;
  isTurn: boolean;
  finishedAt: number | null;
  role: string | null;
}): HTMLElement {
  const el = document.createElement("div");
  el.className = "seat" + (opts.isTurn ? " turn" : "") + (opts.you ? " you" : "");
  el.dataset.seat = String(info.index);

  const head = document.createElement("div");
  head.className = "seat-head";
  head.textContent = `seat ${info.index}` + (opts.you ? " (you)" : ` [${info.spec ?? info.kind}]`);
  el.appendChild(head);

  const count = document.createElement("div");
  count.className = "seat-count";
  count.textContent = opts.finishedAt !== null
    ? `finished #${opts.finishedAt + 1}` : `${opts.handSize} cards`;
  el.appendChild(count);

  const move = document.createElement("div");
  move.className = "seat-move";
  move.textContent = opts.lastMove ?? "";
  el.appendChild(move);

  if (opts.role) {
    const role = document.createElement("div");
    role.className = "seat-role";
    role.textContent = opts.role;
    el.appendChild(role);
  }
  return el;
}

/** Candidate table for a bot seat: every candidate plus the pick. */
export function botPanel(msg: BotMoveMsg): HTMLElement {
  const el = document.createElement("div");
  el.className = "bot-panel";

  const head = document.createElement("div");
  head.className = "bot-head";
  head.textContent = `seat ${msg.seat} considered`;
  el.appendChild(head);

  const list = document.createElement("table");
  list.className = "candidates";
  for (const c of msg.candidates ?? []) {
    const row = document.createElement("tr");
    row.className = "candidate" + (c.move === msg.chosen ? " chosen" : "");

    const move = document.createElement("td");
    move.textContent = c.move;
    row.appendChild(move);

    const score = document.createElement("td");
    score.className = "score";
    score.textContent = c.score.toFixed(3);
    row.appendChild(score);

    const mark = document.createElement("td");
    mark.className = "mark";
    mark.textContent = c.move === msg.chosen ? "◀ played" : "";
    row.appendChild(mark);

    list.appendChild(row);
  }
  el.appendChild(list);
  return el;
}

/** Badge strip naming the combos the current selection could be. */
export function matchBadges(matches: LegalEntry[]): HTMLElement {
  const el = document.createElement("div");
  el.className = "matches";
  for (const m of matches) {
    const b = document.createElement("span");
    b.className = "badge";
    b.textContent = m.move;
    b.dataset.index = String(m.index);
    el.appendChild(b);
  }
  return el;
}

export function trickArea(view: ViewJson): HTMLElement {
  const el = document.createElement("div");
  el.className = "trick";
  const target = document.createElement("div");
  target.className = "to-beat";
  if (view.to_beat) {
    target.textContent = "to beat:";
    for (const t of view.to_beat.cards) target.appendChild(cardEl(t, { small: true }));
  } else {
    target.textContent = "new trick: anything goes";
  }
  el.appendChild(target);
  return el;
}

/** Replay panel: the same fields the case-study dump prints. */
export function replayPanel(p: Panel): HTMLElement {
  const el = document.createElement("div");
  el.className = "replay-panel";

  const head = document.createElement("div");
  head.className = "replay-head";
  head.textContent = `decision ${p.decision_index} — round ${p.round}, level ${p.level}, seat ${p.seat}`;
  el.appendChild(head);

  const hand = document.createElement("div");
  hand.className = "replay-hand";
  for (const t of p.hand) hand.appendChild(cardEl(t, { small: true }));
  el.appendChild(hand);

  const meta = document.createElement("div");
  meta.className = "replay-meta";
  meta.textContent = `counts ${p.remaining_hand_counts.join("/")} — to beat: ${p.to_beat ?? "nothing"}`;
  el.appendChild(meta);

  const hist = document.createElement("ol");
  hist.className = "replay-history";
  for (const h of p.history) {
    const li = document.createElement("li");
    li.textContent = `seat ${h.seat}: ${h.move}`;
    hist.appendChild(li);
  }
  el.appendChild(hist);

  if (p.candidates) {
    const cands = document.createElement("table");
    cands.className = "candidates";
    for (const c of p.candidates) {
      const row = document.createElement("tr");
      row.className = "candidate" + (isChosen(c, p.chosen) ? " chosen" : "");
      const mv = document.createElement("td");
      mv.textContent = c.cards ?? c.move;
      row.appendChild(mv);
      const sc = document.createElement("td");
      sc.textContent = c.score.toFixed(4);
      row.appendChild(sc);
      cands.appendChild(row);
    }
    el.appendChild(cands);
  }
  if (p.legal) {
    const legal = document.createElement("div");
    legal.className = "replay-legal";
    legal.textContent = `${p.legal.length} legal actions`;
    el.appendChild(legal);
  }

  const chosen = document.createElement("div");
  chosen.className = "replay-chosen";
  chosen.textContent = `played: ${p.chosen}`;
  el.appendChild(chosen);
  return el;
}

// the log's chosen text is suit-explicit; candidates carry the same
// form in `cards` when the agent reports it, else only the short form
function isChosen(c: { move: string; cards?: string }, chosenFull: string): boolean {
  if (c.cards !== undefined) return c.cards === chosenFull;
  if (chosenFull === "Pass") return c.move === "Pass";
  const sep = chosenFull.indexOf(":");
  const kind = chosenFull.slice(0, sep);
  const ranks = chosenFull.slice(sep + 1).split(" ").map(rankOf).join("");
  return c.move === `${kind}:${ranks}`;
}
