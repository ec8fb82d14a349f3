"""Live table server: bots and humans at one table over JSON messages.

Transports: newline-delimited JSON over TCP, or WebSocket text frames
(the same JSON), sniffed per connection; plain GET requests are served
from a static directory so the browser client can be hosted directly.
The wire schema is documented in docs/protocol.md.
"""

from __future__ import annotations

import asyncio
import base64
import hashlib
import json
import mimetypes
import os
import random
import struct

from . import features
from .agents import Agent, RandomAgent, parse_agent_spec
from .cards import (Combo, card_rank, card_str, combo_str, combo_str_full,
                    parse_card, RANK_POINT)
from .engine import NUM_SEATS, Episode, IllegalMove, tribute_return

WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


class Connection:
    """Transport-agnostic duplex JSON message stream."""

    async def send(self, msg: dict):
        raise NotImplementedError

    async def recv(self):
        """Next message dict, or None when the peer is gone."""
        raise NotImplementedError

    async def close(self):
        pass


class JsonLineConnection(Connection):
    def __init__(self, reader, writer):
        self.reader = reader
        self.writer = writer

    async def send(self, msg):
        self.writer.write(json.dumps(msg).encode("utf-8") + b"\n")
        await self.writer.drain()

    async def recv(self):
        try:
            line = await self.reader.readline()
        except (ConnectionError, OSError):
            return None
        if not line:
            return None
        try:
            return json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            return {"type": "malformed"}

    async def close(self):
        try:
            self.writer.close()
            await self.writer.wait_closed()
        except (ConnectionError, OSError):
            pass


class WebSocketConnection(Connection):
    """Minimal RFC 6455 server endpoint: text frames, ping/pong, close."""

    def __init__(self, reader, writer):
        self.reader = reader
        self.writer = writer
        self.closed = False

    async def send(self, msg):
        await self._send_frame(0x1, json.dumps(msg).encode("utf-8"))

    async def _send_frame(self, opcode: int, payload: bytes):
        if self.closed:
            return
        head = bytes([0x80 | opcode])
        n = len(payload)
        if n < 126:
            head += bytes([n])
        elif n < 1 << 16:
            head += bytes([126]) + struct.pack(">H", n)
        else:
            head += bytes([127]) + struct.pack(">Q", n)
        try:
            self.writer.write(head + payload)
            await self.writer.drain()
        except (ConnectionError, OSError):
            self.closed = True

    async def recv(self):
        buf = b""
        while True:
            frame = await self._read_frame()
            if frame is None:
                return None
            opcode, payload = frame
            if opcode == 0x8:                      # close
                await self._send_frame(0x8, b"")
                self.closed = True
                return None
            if opcode == 0x9:                      # ping
                await self._send_frame(0xA, payload)
                continue
            if opcode == 0xA:                      # pong
                continue
            buf += payload
            if opcode in (0x0, 0x1, 0x2):
                try:
                    return json.loads(buf.decode("utf-8"))
                except (UnicodeDecodeError, json.JSONDecodeError):
                    return {"type": "malformed"}

    async def _read_frame(self):
        try:
            head = await self.reader.readexactly(2)
        except (asyncio.IncompleteReadError, ConnectionError, OSError):
            return None
        opcode = head[0] & 0x0F
        masked = head[1] & 0x80
        n = head[1] & 0x7F
        try:
            if n == 126:
                (n,) = struct.unpack(">H", await self.reader.readexactly(2))
            elif n == 127:
                (n,) = struct.unpack(">Q", await self.reader.readexactly(8))
            mask = await self.reader.readexactly(4) if masked else b"\0" * 4
            payload = await self.reader.readexactly(n)
        except (asyncio.IncompleteReadError, ConnectionError, OSError):
            return None
        if masked:
            payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
        return opcode, payload

    async def close(self):
        await self._send_frame(0x8, b"")
        try:
            self.writer.close()
            await self.writer.wait_closed()
        except (ConnectionError, OSError):
            pass


class Seat:
    def __init__(self, index: int, spec: str, seed: int):
        self.index = index
        self.spec = spec
        self.is_human = spec == "human"
        self.agent: Agent | None = None
        if not self.is_human:
            self.agent = parse_agent_spec(spec, seed=seed)
        self.fallback = RandomAgent(seed=seed + 17)
        self.conn: Connection | None = None
        self.inbox: asyncio.Queue | None = None

    @property
    def connected(self) -> bool:
        return self.conn is not None


class TableService:
    """One table, four seats, sequential episodes."""

    def __init__(self, seat_specs, seed: int = 0, max_rounds: int = 50,
                 heartbeat: float = 15.0, static_dir: str | None = None,
                 act_timeout: float | None = None):
        if len(seat_specs) != NUM_SEATS:
            raise ValueError("four seat specs required")
        self.seats = [Seat(i, s, seed * 31 + i) for i, s in enumerate(seat_specs)]
        self.seed = seed
        self.max_rounds = max_rounds
        self.heartbeat = heartbeat
        self.static_dir = static_dir
        self.act_timeout = act_timeout
        self.seq = 0
        self.game_index = 0
        self.game_id = f"g{seed}-0"
        self.episode: Episode | None = None
        self._episode_task = None
        self._server = None
        self._start_requested = asyncio.Event()
        self.loop = None

    # -- message plumbing ---------------------------------------------------

    def _stamp(self, msg: dict, seat: int | None = None) -> dict:
        self.seq += 1
        msg["game_id"] = self.game_id
        msg["seq"] = self.seq
        if seat is not None:
            msg["seat"] = seat
        return msg

    async def _send_to(self, seat: Seat, msg: dict):
        if seat.conn is None:
            return
        try:
            await seat.conn.send(msg)
        except (ConnectionError, OSError):
            await self._drop(seat)

    async def _broadcast(self, make_msg):
        """make_msg(viewer_seat_index) -> dict; humans only."""
        for seat in self.seats:
            if seat.connected:
                await self._send_to(seat, self._stamp(make_msg(seat.index)))

    async def _drop(self, seat: Seat):
        if seat.conn is not None:
            conn, seat.conn = seat.conn, None
            await conn.close()

    # -- connection handling ------------------------------------------------

    async def handle_connection(self, reader, writer):
        first = await reader.read(4)
        if not first:
            writer.close()
            return
        if first == b"GET " or first[:3] in (b"GET", b"POS", b"HEA"):
            await self._handle_http(first, reader, writer)
            return
        conn = JsonLineConnection(reader, writer)
        # the sniffed bytes are part of the first JSON line
        rest = await reader.readline()
        try:
            hello = json.loads((first + rest).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            await conn.send({"type": "error", "code": "malformed",
                             "message": "expected a hello JSON line"})
            await conn.close()
            return
        await self._welcome(conn, hello)

    async def _handle_http(self, first: bytes, reader, writer):
        raw = first + await reader.readuntil(b"\r\n\r\n")
        head = raw.decode("latin-1")
        request_line = head.split("\r\n", 1)[0]
        parts = request_line.split(" ")
        path = parts[1] if len(parts) > 1 else "/"
        headers = {}
        for line in head.split("\r\n")[1:]:
            if ":" in line:
                k, v = line.split(":", 1)
                headers[k.strip().lower()] = v.strip()
        if headers.get("upgrade", "").lower() == "websocket":
            key = headers.get("sec-websocket-key", "")
            accept = base64.b64encode(
                hashlib.sha1((key + WS_GUID).encode()).digest()).decode()
            writer.write(
                b"HTTP/1.1 101 Switching Protocols\r\n"
                b"Upgrade: websocket\r\nConnection: Upgrade\r\n"
                + f"Sec-WebSocket-Accept: {accept}\r\n\r\n".encode())
            await writer.drain()
            conn = WebSocketConnection(reader, writer)
            hello = await conn.recv()
            if hello is None:
                await conn.close()
                return
            await self._welcome(conn, hello)
            return
        await self._serve_static(path, writer)

    async def _serve_static(self, path: str, writer):
        body, status, ctype = b"not found", 404, "text/plain"
        if self.static_dir:
            rel = path.split("?")[0].lstrip("/") or "index.html"
            full = os.path.realpath(os.path.join(self.static_dir, rel))
            root = os.path.realpath(self.static_dir)
            if full.startswith(root + os.sep) or full == root:
                if os.path.isdir(full):
                    full = os.path.join(full, "index.html")
                if os.path.isfile(full):
                    with open(full, "rb") as f:
                        body = f.read()
                    status = 200
                    ctype = mimetypes.guess_type(full)[0] or "application/octet-stream"
        writer.write(
            f"HTTP/1.1 {status} {'OK' if status == 200 else 'Not Found'}\r\n"
            f"Content-Type: {ctype}\r\nContent-Length: {len(body)}\r\n"
            f"Connection: close\r\n\r\n".encode() + body)
        await writer.drain()
        writer.close()

    async def _welcome(self, conn: Connection, hello: dict):
        if hello.get("type") != "hello":
            await conn.send({"type": "error", "code": "protocol",
                             "message": "first message must be hello"})
            await conn.close()
            return
        want = hello.get("seat")
        seat = None
        for s in self.seats:
            if s.is_human and not s.connected and (want is None or s.index == want):
                seat = s
                break
        if seat is None:
            await conn.send({"type": "error", "code": "no_seat",
                             "message": "no free human seat"})
            await conn.close()
            return
        seat.conn = conn
        seat.inbox = asyncio.Queue()
        await self._send_to(seat, self._stamp({
            "type": "hello",
            "you": seat.index,
            "seats": [{"index": s.index,
                       "kind": "human" if s.is_human else "bot",
                       "spec": s.spec,
                       "connected": s.connected} for s in self.seats],
        }, seat.index))
        asyncio.ensure_future(self._pump(seat))
        if all(s.connected for s in self.seats if s.is_human):
            self._start_requested.set()

    async def _pump(self, seat: Seat):
        """Reads the connection into the seat inbox until it drops."""
        conn = seat.conn
        while seat.conn is conn:
            msg = await conn.recv()
            if msg is None:
                if seat.conn is conn:
                    seat.conn = None
                    seat.inbox.put_nowait(None)
                return
            if msg.get("type") == "pong":
                continue
            if msg.get("type") == "new_game":
                self._start_requested.set()
                continue
            seat.inbox.put_nowait(msg)

    async def _heartbeat_loop(self):
        while True:
            await asyncio.sleep(self.heartbeat)
            for seat in self.seats:
                if seat.connected:
                    await self._send_to(seat, self._stamp({"type": "ping"}))

    # -- game driving -------------------------------------------------------

    async def play_episode(self) -> Episode:
        """Runs one full episode on the table; returns the engine record."""
        self.loop = asyncio.get_event_loop()
        self.game_id = f"g{self.seed}-{self.game_index}"
        self.game_index += 1
        ep = Episode(
            rng=random.Random(self.seed * 9176 + self.game_index),
            max_rounds=self.max_rounds,
            record_log=True,
            return_chooser=self._return_chooser,
        )
        self.episode = ep
        await self._broadcast(lambda v: {
            "type": "new_game",
            "round": ep.episode.round_index,
            "level": ep.episode.current_level,
            "team_levels": list(ep.episode.team_levels),
            "leader": ep.round.turn,
            "seats": [{"index": s.index,
                       "kind": "human" if s.is_human else "bot"}
                      for s in self.seats],
        })
        await self._broadcast_state(ep, last=None)
        round_index = ep.episode.round_index
        while not ep.over:
            seat_i = ep.seat_to_act
            legal = ep.legal_actions()
            seat = self.seats[seat_i]
            view = features.view_for(seat_i, ep.round, ep.episode)
            if seat.is_human and seat.connected:
                move = await self._human_act(seat, view, legal)
            else:
                agent = seat.agent if not seat.is_human else seat.fallback
                move = agent.decide(view, legal)
                if not any(move.identity() == c.identity() for c in legal):
                    move = legal[0]
            detail = {
                "seat": seat_i,
                "move": combo_str(move),
                "cards": [card_str(i) for i in move.cards.indices()],
                "kind": int(move.kind),
                "key": move.key_rank,
            }
            if not seat.is_human:
                bot_msg = dict(detail, type="bot_move")
                explain = seat.agent.explain(view, legal)
                if explain is not None:
                    bot_msg["candidates"] = explain[:8]
                    bot_msg["chosen"] = combo_str(move)
                await self._broadcast(lambda v, m=bot_msg: dict(m))
            await self._run_blocking(ep.play, move)
            await self._broadcast_state(ep, last=detail)
            if not ep.over and ep.episode.round_index != round_index:
                round_index = ep.episode.round_index
                await self._round_transition(ep)
        rec = ep.round_records[-1]
        await self._broadcast(lambda v: {
            "type": "round_end",
            "roles": list(rec.result.roles),
            "winning_team": rec.result.winning_team,
            "promotion": rec.result.promotion,
            "finish_order": list(rec.result.finish_order),
            "team_levels": list(ep.episode.team_levels),
        })
        await self._broadcast(lambda v: {
            "type": "episode_end",
            "winner_team": ep.episode_winner,
            "team_levels": list(ep.episode.team_levels),
            "rounds": len(ep.round_records),
        })
        return ep

    async def _round_transition(self, ep: Episode):
        rec = ep.round_records[-1]
        await self._broadcast(lambda v: {
            "type": "round_end",
            "roles": list(rec.result.roles),
            "winning_team": rec.result.winning_team,
            "promotion": rec.result.promotion,
            "finish_order": list(rec.result.finish_order),
            "team_levels": list(ep.episode.team_levels),
        })
        start = next(e for e in reversed(ep.log) if e["event"] == "round_start")
        if start.get("tribute"):
            await self._broadcast(lambda v: dict(start["tribute"],
                                                 type="tribute_info",
                                                 round=start["round"]))
        await self._broadcast(lambda v: {
            "type": "new_game",
            "round": ep.episode.round_index,
            "level": ep.episode.current_level,
            "team_levels": list(ep.episode.team_levels),
            "leader": ep.round.turn,
            "seats": [{"index": s.index,
                       "kind": "human" if s.is_human else "bot"}
                      for s in self.seats],
        })
        await self._broadcast_state(ep, last=None)

    async def _broadcast_state(self, ep: Episode, last):
        def make(viewer: int) -> dict:
            view = features.view_for(viewer, ep.round, ep.episode)
            return {"type": "state", "view": view.to_json(),
                    "turn": ep.round.turn, "last_move": last}
        await self._broadcast(make)

    async def _human_act(self, seat: Seat, view, legal) -> Combo:
        payload = {
            "type": "legal_actions",
            "legal": [{"index": i, "move": combo_str(c),
                       "cards": [card_str(x) for x in c.cards.indices()],
                       "kind": int(c.kind), "key": c.key_rank}
                      for i, c in enumerate(legal)],
            "view": view.to_json(),
        }
        await self._send_to(seat, self._stamp(dict(payload), seat.index))
        while True:
            if not seat.connected:
                return seat.fallback.decide(view, legal)
            try:
                if self.act_timeout is None:
                    msg = await seat.inbox.get()
                else:
                    msg = await asyncio.wait_for(seat.inbox.get(),
                                                 self.act_timeout)
            except asyncio.TimeoutError:
                await self._drop(seat)
                return seat.fallback.decide(view, legal)
            if msg is None:
                return seat.fallback.decide(view, legal)
            if msg.get("type") != "act":
                continue
            idx = msg.get("index")
            if isinstance(idx, int) and 0 <= idx < len(legal):
                return legal[idx]
            match = self._match_cards(msg, legal)
            if match is not None:
                return match
            await self._send_to(seat, self._stamp({
                "type": "error", "code": "illegal_action",
                "message": "that is not one of your legal actions",
                "legal": [combo_str_full(c) for c in legal],
            }, seat.index))

    @staticmethod
    def _match_cards(msg: dict, legal) -> Combo | None:
        tokens = msg.get("cards")
        if tokens is None:
            return None
        try:
            want = sorted(parse_card(t) for t in tokens)
        except (ValueError, KeyError, TypeError):
            return None
        kind = msg.get("kind")
        for c in legal:
            if sorted(c.cards.indices()) == want:
                if kind is None or int(c.kind) == kind:
                    return c
        return None

    def _return_chooser(self, receiver: int, hand, level: int, payer: int):
        """Engine hook for the tribute-return choice (runs off-loop)."""
        seat = self.seats[receiver]
        if not seat.is_human or not seat.connected or self.loop is None:
            return tribute_return(hand, level)
        fut = asyncio.run_coroutine_threadsafe(
            self._prompt_return(seat, hand, level, payer), self.loop)
        return fut.result(timeout=600.0)

    async def _prompt_return(self, seat: Seat, hand, level: int, payer: int):
        options = sorted(
            {i for i in hand.indices()
             if RANK_POINT.get(card_rank(i), 99) <= 10})
        await self._send_to(seat, self._stamp({
            "type": "tribute_prompt",
            "payer": payer,
            "hand": [card_str(i) for i in hand.indices()],
            "options": [card_str(i) for i in options],
        }, seat.index))
        while True:
            if not seat.connected:
                return tribute_return(hand, level)
            msg = await seat.inbox.get()
            if msg is None:
                return tribute_return(hand, level)
            if msg.get("type") != "tribute_return":
                continue
            try:
                card = parse_card(msg.get("card", ""))
            except (ValueError, KeyError):
                card = -1
            if card in options:
                return card
            await self._send_to(seat, self._stamp({
                "type": "error", "code": "illegal_return",
                "message": "return must be a held card of point 10 or lower",
                "options": [card_str(i) for i in options],
            }, seat.index))

    async def _run_blocking(self, fn, *args):
        return await asyncio.get_event_loop().run_in_executor(None, fn, *args)

    # -- server lifecycle ---------------------------------------------------

    async def start(self, host: str = "127.0.0.1", port: int = 8765):
        # large enough for a full legal_actions payload on one line
        self._server = await asyncio.start_server(
            self.handle_connection, host, port, limit=1 << 22)
        if self.heartbeat:
            asyncio.ensure_future(self._heartbeat_loop())
        return self._server

    async def serve_games(self, n_games: int | None = None):
        """Waits for the table to fill, then plays episodes back to back."""
        played = 0
        while n_games is None or played < n_games:
            if any(s.is_human for s in self.seats):
                await self._start_requested.wait()
                self._start_requested.clear()
            await self.play_episode()
            played += 1

    async def stop(self):
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
        for seat in self.seats:
            await self._drop(seat)

    def episode_log(self) -> str:
        if self.episode is None:
            raise ValueError("no episode has been played")
        return self.episode.dump_log()


async def host_table(seat_specs, host="127.0.0.1", port=8765, seed=0,
                     static_dir=None, n_games=None, heartbeat=15.0,
                     act_timeout=None):
    service = TableService(seat_specs, seed=seed, static_dir=static_dir,
                           heartbeat=heartbeat, act_timeout=act_timeout)
    server = await service.start(host, port)
    try:
        await service.serve_games(n_games)
    finally:
        await service.stop()
    return service
