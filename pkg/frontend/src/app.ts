/**
 * Entry point: wires the WebSocket, the reducer and the DOM together.
 * Live mode plays on a `guandan serve` table; replay mode steps through
 * an episode log file next to an optional case-study JSON.
 */

import { actByIndex, helloMsg, newGameMsg, parseServer, pongMsg, tributeReturnMsg } from "./protocol.js";
import { apply, initialState, passEntry, submittable, TableState } from "./state.js";
import { botPanel, handRow, matchBadges, replayPanel, seatPanel, trickArea } from "./render.js";
import { CaseStudyJson, Replay } from "./replay.js";

const $ = (id: string) => document.getElementById(id)!;

const st: TableState = initialState();
let ws: WebSocket | null = null;
let selection = new Set<number>();
let lastHandKey = "";
let reconnectDelay = 1000;

function wsUrl(): string {
  const fromHash = location.hash.match(/ws=([^&]+)/);
  if (fromHash) return decodeURIComponent(fromHash[1]);
  return `ws://${location.host || "127.0.0.1:8765"}/`;
}

function connect() {
  const url = wsUrl();
  setStatus(`connecting to ${url} ...`);
  ws = new WebSocket(url);
  ws.onopen = () => {
    reconnectDelay = 1000;
    setStatus("connected");
    ws!.send(helloMsg());
  };
  ws.onmessage = (ev) => {
    const msg = parseServer(String(ev.data));
    if (!msg) return;
    if (msg.type === "ping") {
      ws!.send(pongMsg());
      return;
    }
    apply(st, msg);
    renderAll();
  };
  ws.onclose = () => {
    setStatus(`disconnected, retrying in ${reconnectDelay / 1000}s`);
    setTimeout(connect, reconnectDelay);
    reconnectDelay = Math.min(reconnectDelay * 2, 15000);
  };
  ws.onerror = () => { /* onclose follows */ };
}

function setStatus(text: string) {
  $("status").textContent = text;
}

function selectedTokens(): string[] {
  const hand = st.view?.hand ?? [];
  return [...selection].sort((a, b) => a - b).map((p) => hand[p]);
}

function sendAct(index: number) {
  ws?.send(actByIndex(index));
  selection.clear();
  renderAll();
}

function renderAll() {
  const view = st.view;

  // selection survives re-renders but not a changed hand
  const handKey = (view?.hand ?? []).join(",");
  if (handKey !== lastHandKey) {
    lastHandKey = handKey;
    selection.clear();
  }

  const seats = $("seats");
  seats.innerHTML = "";
  if (st.seats.length && view) {
    const finishedAt = (s: number) => {
      const i = view.finish_order.indexOf(s);
      return i < 0 ? null : i;
    };
    for (const info of st.seats) {
      const lm = view.last_moves[info.index];
      seats.appendChild(seatPanel(info, {
        you: info.index === st.you,
        handSize: view.hand_sizes[info.index],
        lastMove: lm ? `${lm.kind}: ${lm.cards.join(" ") || "Pass"}` : null,
        isTurn: st.turn === info.index,
        finishedAt: finishedAt(info.index),
        role: st.roundEnd?.roles[info.index] ?? null,
      }));
    }
  }

  const trick = $("trick");
  trick.innerHTML = "";
  if (view) trick.appendChild(trickArea(view));

  const hand = $("hand");
  hand.innerHTML = "";
  if (view && st.you !== null && view.seat === st.you) {
    hand.appendChild(handRow(view.hand, selection, (pos) => {
      if (selection.has(pos)) selection.delete(pos);
      else selection.add(pos);
      renderAll();
    }));
  }

  const matches = st.legal ? submittable(st, selectedTokens()) : [];
  const badges = $("badges");
  badges.innerHTML = "";
  if (matches.length > 1) {
    const strip = matchBadges(matches);
    strip.querySelectorAll<HTMLElement>(".badge").forEach((b) => {
      b.addEventListener("click", () => sendAct(Number(b.dataset.index)));
    });
    badges.appendChild(strip);
  }

  const play = $("play") as HTMLButtonElement;
  play.disabled = matches.length === 0;
  play.onclick = () => { if (matches.length) sendAct(matches[0].index); };

  const pass = $("pass") as HTMLButtonElement;
  const pe = st.legal && st.turn === st.you ? passEntry(st.legal) : null;
  pass.disabled = pe === null;
  pass.onclick = () => { if (pe) sendAct(pe.index); };

  const next = $("next-game") as HTMLButtonElement;
  next.style.display = st.episodeEnd ? "" : "none";
  next.onclick = () => ws?.send(newGameMsg());

  const bots = $("bots");
  bots.innerHTML = "";
  for (const bm of st.botMoves) {
    if (bm?.candidates) bots.appendChild(botPanel(bm));
  }

  const banner = $("banner");
  banner.innerHTML = "";
  if (st.episodeEnd) {
    banner.textContent = st.episodeEnd.winner_team === null
      ? `round cap reached — levels ${st.episodeEnd.team_levels.join(" vs ")}`
      : `team ${st.episodeEnd.winner_team} takes the episode in ${st.episodeEnd.rounds} rounds`;
  } else if (st.roundEnd) {
    banner.textContent = `round ${st.round}: team ${st.roundEnd.winning_team} wins, `
      + `up ${st.roundEnd.promotion} — levels ${st.teamLevels.join(" vs ")}`;
  }

  const tribute = $("tribute");
  tribute.innerHTML = "";
  if (st.tributePrompt) {
    const p = document.createElement("div");
    p.className = "tribute-prompt";
    p.textContent = `give a card back to seat ${st.tributePrompt.payer}: `;
    for (const card of st.tributePrompt.options) {
      const b = document.createElement("button");
      b.textContent = card;
      b.addEventListener("click", () => ws?.send(tributeReturnMsg(card)));
      p.appendChild(b);
    }
    tribute.appendChild(p);
  }

  const level = $("level");
  level.textContent = view
    ? `round ${st.round} — playing ${"2 3 4 5 6 7 8 9 10 J Q K A".split(" ")[st.level]}s — levels ${st.teamLevels.join(" / ")}`
    : "";

  const feedEl = $("feed");
  feedEl.textContent = st.feed.slice(-30).join("\n");
  feedEl.scrollTop = feedEl.scrollHeight;

  if (st.lastError) setStatus(`server: ${st.lastError.code} ${st.lastError.message ?? ""}`);
}

// -- replay mode -------------------------------------------------------------

let replay: Replay | null = null;
let sidecar: CaseStudyJson | null = null;
let cursor = 0;

function renderReplay() {
  const root = $("replay-panel");
  root.innerHTML = "";
  if (!replay) return;
  const side = sidecar && sidecar.decision_index === cursor ? sidecar : undefined;
  const p = replay.panel(cursor, side);
  root.appendChild(replayPanel(p));

  const banner = replay.banners.get(cursor);
  if (banner) {
    const b = document.createElement("div");
    b.className = "replay-banner";
    b.textContent = `round ${banner.round} ends — roles ${banner.roles.join(", ")}, `
      + `team ${banner.winning_team} up ${banner.promotion}`;
    root.appendChild(b);
  }
  $("replay-pos").textContent = `${cursor + 1} / ${replay.decisions}`;
}

function initReplayControls() {
  ($("log-file") as HTMLInputElement).addEventListener("change", async (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (!file) return;
    try {
      replay = new Replay(await file.text());
      cursor = 0;
      renderReplay();
    } catch (e) {
      $("replay-panel").textContent = String(e);
    }
  });
  ($("case-file") as HTMLInputElement).addEventListener("change", async (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (!file) return;
    try {
      sidecar = JSON.parse(await file.text());
      if (replay && sidecar) {
        cursor = sidecar.decision_index;
        renderReplay();
      }
    } catch (e) {
      $("replay-panel").textContent = String(e);
    }
  });
  $("replay-prev").addEventListener("click", () => {
    if (replay && cursor > 0) { cursor--; renderReplay(); }
  });
  $("replay-next").addEventListener("click", () => {
    if (replay && cursor < replay.decisions - 1) { cursor++; renderReplay(); }
  });
}

function initModeToggle() {
  $("mode-live").addEventListener("click", () => {
    $("live-root").style.display = "";
    $("replay-root").style.display = "none";
  });
  $("mode-replay").addEventListener("click", () => {
    $("live-root").style.display = "none";
    $("replay-root").style.display = "";
  });
}

if (typeof document !== "undefined" && document.getElementById("live-root")) {
  initModeToggle();
  initReplayControls();
  connect();
}
