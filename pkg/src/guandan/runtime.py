"""Actor-learner orchestration: parameter bulletin, sample transport,
training loops, checkpoint cadence, metrics, and periodic evaluation.

Single-machine by default (threads + in-process queue); a length-prefixed
TCP frame protocol connects learner and actor processes across machines.
The transport carries pickled numpy batches and trusts its peers.
"""

from __future__ import annotations

import json
import os
import pickle
import queue
import random
import socket
import socketserver
import struct
import threading
import time
import zlib
from dataclasses import dataclass, field

import numpy as np

from .dmc import DmcConfig, DmcLearner, SeatTrajectory, actor_episode
from .net import load_checkpoint, save_checkpoint
from .ppo import PpoConfig, PpoLearner, ppo_actor_episode


def _params_checksum(arrays) -> int:
    crc = 0
    for a in arrays:
        crc = zlib.crc32(np.ascontiguousarray(a, dtype=np.float32).tobytes(), crc)
    return crc


class TornSnapshot(RuntimeError):
    pass


class ParameterBulletin:
    """Latest parameter snapshot + version; checksums guard torn reads."""

    def __init__(self):
        self._lock = threading.Lock()
        self._params = None
        self._version = 0
        self._checksum = 0

    def publish(self, params, version: int):
        if version <= self._version:
            raise ValueError(
                f"version must increase: {version} <= {self._version}")
        snapshot = [np.array(p, dtype=np.float32, copy=True) for p in params]
        checksum = _params_checksum(snapshot)
        with self._lock:
            self._params = snapshot
            self._version = version
            self._checksum = checksum

    @property
    def version(self) -> int:
        return self._version

    def pull(self):
        """Returns (params, version) or (None, 0) before the first publish."""
        with self._lock:
            if self._params is None:
                return None, 0
            params = [p.copy() for p in self._params]
            version, checksum = self._version, self._checksum
        if _params_checksum(params) != checksum:
            raise TornSnapshot("parameter snapshot failed checksum")
        return params, version


class SampleChannel:
    """Bounded FIFO of trajectory batches; put blocks when full."""

    CLOSE = object()

    def __init__(self, capacity: int = 64):
        self.q = queue.Queue(maxsize=capacity)
        self.produced = 0
        self.received = 0
        self._lock = threading.Lock()

    def put(self, batch):
        self.q.put(batch)
        with self._lock:
            self.produced += len(batch)

    def get(self, timeout: float | None = None):
        try:
            batch = self.q.get(timeout=timeout)
        except queue.Empty:
            return None
        if batch is self.CLOSE:
            return self.CLOSE
        with self._lock:
            self.received += len(batch)
        return batch

    def close(self):
        self.q.put(self.CLOSE)


@dataclass
class RuntimeConfig:
    algo: str = "dmc"                   # "dmc" or "ppo"
    dmc: DmcConfig = field(default_factory=DmcConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    n_actors: int = 4
    episodes_per_actor: int = 100
    checkpoint_dir: str = "checkpoints"
    checkpoint_every_updates: int = 50
    checkpoint_every_seconds: float | None = None
    metrics_path: str | None = None
    seed: int = 0
    sync: bool = True                   # deterministic round-robin driver
    channel_capacity: int = 64
    dmc_checkpoint: str | None = None   # frozen critic for the ppo algo
    resume_from: str | None = None

    def train_cfg(self):
        return self.dmc if self.algo == "dmc" else self.ppo


@dataclass
class TrainingStats:
    episodes: int = 0
    trajectories_sent: int = 0
    trajectories_received: int = 0
    receptions: int = 0
    updates: int = 0
    version: int = 0
    checkpoints: list = field(default_factory=list)
    wall_seconds: float = 0.0


class MetricsWriter:
    def __init__(self, path: str | None):
        self.path = path
        self._fh = open(path, "a", encoding="utf-8") if path else None

    def write(self, record: dict):
        if self._fh is None:
            return
        record = dict(record, time=time.time())
        self._fh.write(json.dumps(record) + "\n")
        self._fh.flush()

    def close(self):
        if self._fh:
            self._fh.close()


def make_learner(cfg: RuntimeConfig):
    if cfg.algo == "dmc":
        learner = DmcLearner(cfg.dmc)
        if cfg.resume_from:
            net, opt, meta = load_checkpoint(cfg.resume_from, expect_kind="q")
            learner.net = net
            if opt is not None:
                learner.optimizer = opt
            learner.updates = meta.get("step", 0)
            learner.version = learner.updates
        return learner
    if cfg.algo == "ppo":
        learner = PpoLearner(cfg.ppo)
        if cfg.resume_from:
            net, opt, meta = load_checkpoint(cfg.resume_from, expect_kind="ppo")
            learner.net = net
            if opt is not None:
                learner.optimizer = opt
            learner.updates = meta.get("step", 0)
            learner.version = learner.updates
        return learner
    raise ValueError(f"unknown algo {cfg.algo!r}")


def checkpoint_path(ckpt_dir: str, step: int) -> str:
    return os.path.join(ckpt_dir, f"ckpt_{step}.dzck")


def write_checkpoint(cfg: RuntimeConfig, learner, extra: dict | None = None):
    os.makedirs(cfg.checkpoint_dir, exist_ok=True)
    path = checkpoint_path(cfg.checkpoint_dir, learner.updates)
    meta = {"algo": cfg.algo}
    if cfg.algo == "ppo":
        meta["k"] = cfg.ppo.k
    if extra:
        meta.update(extra)
    save_checkpoint(path, learner.net, learner.optimizer,
                    step=learner.updates, extra=meta)
    return path


def _actor_rng(cfg: RuntimeConfig, actor_id: int, episode: int) -> random.Random:
    return random.Random((cfg.seed * 7919 + actor_id) * 1_000_003 + episode)


def _play_episode(cfg: RuntimeConfig, net, frozen_dmc, rng):
    if cfg.algo == "dmc":
        return actor_episode(net, cfg.dmc, rng)
    return ppo_actor_episode(frozen_dmc, net, cfg.ppo, rng)


def _load_frozen_dmc(cfg: RuntimeConfig):
    if cfg.algo != "ppo":
        return None
    if cfg.dmc_checkpoint is None:
        raise ValueError("ppo training needs dmc_checkpoint for candidates")
    net, _, _ = load_checkpoint(cfg.dmc_checkpoint, expect_kind="q")
    return net


def run_training_sync(cfg: RuntimeConfig, synthetic: bool = False) -> TrainingStats:
    """Deterministic driver: actors advance round-robin on one thread."""
    t0 = time.time()
    learner = make_learner(cfg)
    bulletin = ParameterBulletin()
    metrics = MetricsWriter(cfg.metrics_path)
    frozen = _load_frozen_dmc(cfg)
    stats = TrainingStats()
    actor_nets = [cfg.train_cfg().make_net() for _ in range(cfg.n_actors)]
    actor_versions = [0] * cfg.n_actors
    for net in actor_nets:
        net.load_params(learner.net.params)
    last_ckpt_time = time.time()
    for episode in range(cfg.episodes_per_actor):
        for actor_id in range(cfg.n_actors):
            params, version = bulletin.pull()
            if params is not None and version > actor_versions[actor_id]:
                actor_nets[actor_id].load_params(params)
                actor_versions[actor_id] = version
            rng = _actor_rng(cfg, actor_id, episode)
            if synthetic:
                trajs = synthetic_trajectories(cfg, actor_id, episode)
            else:
                trajs, _ = _play_episode(cfg, actor_nets[actor_id], frozen, rng)
            stats.episodes += 1
            stats.trajectories_sent += len(trajs)
            stats.trajectories_received += len(trajs)
            updated = learner.receive(trajs)
            stats.receptions = learner.receptions
            if updated:
                bulletin.publish(learner.net.params, learner.version)
                metrics.write(_update_record(learner, t0))
                due = learner.updates % cfg.checkpoint_every_updates == 0
                if cfg.checkpoint_every_seconds is not None:
                    due = due or (time.time() - last_ckpt_time
                                  >= cfg.checkpoint_every_seconds)
                if due:
                    path = write_checkpoint(cfg, learner)
                    stats.checkpoints.append(path)
                    last_ckpt_time = time.time()
                    metrics.write({"event": "checkpoint", "path": path,
                                   "updates": learner.updates})
    stats.updates = learner.updates
    stats.version = learner.version
    if learner.updates > 0 and (not stats.checkpoints or
                                stats.checkpoints[-1] !=
                                checkpoint_path(cfg.checkpoint_dir, learner.updates)):
        stats.checkpoints.append(write_checkpoint(cfg, learner))
    stats.wall_seconds = time.time() - t0
    metrics.write({"event": "done", **_stats_json(stats)})
    metrics.close()
    return stats


def run_training_threaded(cfg: RuntimeConfig, synthetic: bool = False) -> TrainingStats:
    """Free-running actors on threads; one learner thread consumes."""
    t0 = time.time()
    learner = make_learner(cfg)
    bulletin = ParameterBulletin()
    channel = SampleChannel(cfg.channel_capacity)
    metrics = MetricsWriter(cfg.metrics_path)
    frozen = _load_frozen_dmc(cfg)
    stats = TrainingStats()
    total_batches = cfg.n_actors * cfg.episodes_per_actor

    def actor_loop(actor_id: int):
        net = cfg.train_cfg().make_net()
        net.load_params(learner.net.params)
        seen_version = 0
        for episode in range(cfg.episodes_per_actor):
            params, version = bulletin.pull()
            if params is not None and version > seen_version:
                net.load_params(params)
                seen_version = version
            rng = _actor_rng(cfg, actor_id, episode)
            if synthetic:
                trajs = synthetic_trajectories(cfg, actor_id, episode)
            else:
                trajs, _ = _play_episode(cfg, net, frozen, rng)
            channel.put(trajs)

    threads = [threading.Thread(target=actor_loop, args=(i,), daemon=True)
               for i in range(cfg.n_actors)]
    for t in threads:
        t.start()

    last_ckpt_time = time.time()
    batches = 0
    while batches < total_batches:
        batch = channel.get(timeout=60.0)
        if batch is None:
            raise RuntimeError("sample channel starved for 60s")
        if batch is SampleChannel.CLOSE:
            break
        batches += 1
        stats.episodes += 1
        stats.trajectories_received += len(batch)
        if learner.receive(batch):
            bulletin.publish(learner.net.params, learner.version)
            metrics.write(_update_record(learner, t0))
            due = learner.updates % cfg.checkpoint_every_updates == 0
            if cfg.checkpoint_every_seconds is not None:
                due = due or (time.time() - last_ckpt_time
                              >= cfg.checkpoint_every_seconds)
            if due:
                path = write_checkpoint(cfg, learner)
                stats.checkpoints.append(path)
                last_ckpt_time = time.time()
    for t in threads:
        t.join()
    stats.trajectories_sent = channel.produced
    stats.receptions = learner.receptions
    stats.updates = learner.updates
    stats.version = learner.version
    if learner.updates > 0 and (not stats.checkpoints or
                                stats.checkpoints[-1] !=
                                checkpoint_path(cfg.checkpoint_dir, learner.updates)):
        stats.checkpoints.append(write_checkpoint(cfg, learner))
    stats.wall_seconds = time.time() - t0
    metrics.write({"event": "done", **_stats_json(stats)})
    metrics.close()
    return stats


def _update_record(learner, t0: float) -> dict:
    elapsed = max(time.time() - t0, 1e-9)
    return {
        "event": "update", "updates": learner.updates,
        "receptions": learner.receptions, "version": learner.version,
        "samples_in": learner.samples_in,
        "buffer_fill": learner.buffer.fill,
        "samples_per_sec": round(learner.samples_in / elapsed, 2),
        **(learner.last_metrics or {}),
    }


def run_training(cfg: RuntimeConfig, synthetic: bool = False) -> TrainingStats:
    if cfg.sync:
        return run_training_sync(cfg, synthetic=synthetic)
    return run_training_threaded(cfg, synthetic=synthetic)


def synthetic_trajectories(cfg: RuntimeConfig, actor_id: int, episode: int):
    """Deterministic fixed-content batch for transport/counting tests."""
    rng = np.random.default_rng(actor_id * 100_003 + episode)
    out = []
    if cfg.algo == "dmc":
        from . import features
        for seat in range(4):
            n = 3
            out.append(SeatTrajectory(
                inputs=rng.normal(size=(n, features.Q_INPUT_DIM)).astype(np.float32),
                behavior_q=rng.normal(size=n).astype(np.float32),
                values=np.full(n, 2.0, dtype=np.float32),
            ))
        return out
    from . import features
    from .ppo import PpoSeatTrajectory
    k = cfg.ppo.k
    dim = features.ppo_input_dim(k)
    for seat in range(4):
        n = 3
        legal = np.ones((n, k), dtype=np.float32)
        out.append(PpoSeatTrajectory(
            inputs=rng.normal(size=(n, dim)).astype(np.float32),
            legal=legal,
            slot=rng.integers(0, k, size=n),
            old_logp=np.full(n, -np.log(k), dtype=np.float32),
            value_est=np.zeros(n, dtype=np.float32),
            advantages=rng.normal(size=n).astype(np.float32),
            returns=rng.normal(size=n).astype(np.float32),
        ))
    return out


def _stats_json(stats: TrainingStats) -> dict:
    return {
        "episodes": stats.episodes,
        "trajectories_sent": stats.trajectories_sent,
        "trajectories_received": stats.trajectories_received,
        "receptions": stats.receptions,
        "updates": stats.updates,
        "version": stats.version,
        "checkpoints": list(stats.checkpoints),
        "wall_seconds": stats.wall_seconds,
    }


def evaluate_checkpoints(ckpt_dir: str, opponent_specs, n_games: int,
                         seed: int = 0, metrics_path: str | None = None,
                         algo: str = "dmc", dmc_checkpoint: str | None = None,
                         k: int = 2):
    """Winrate series over every checkpoint in the directory, oldest first."""
    from .agents import DmcAgent, PpoAgent, parse_agent_spec
    from .arena import play_match

    paths = sorted(
        (p for p in os.listdir(ckpt_dir)
         if p.startswith("ckpt_") and p.endswith(".dzck")),
        key=lambda p: int(p[5:-5]),
    )
    metrics = MetricsWriter(metrics_path)
    series = []
    for name in paths:
        path = os.path.join(ckpt_dir, name)
        step = int(name[5:-5])
        for spec in opponent_specs:
            if algo == "dmc":
                team = [DmcAgent.from_checkpoint(path, seed=seed + 1),
                        DmcAgent.from_checkpoint(path, seed=seed + 2)]
            else:
                team = [PpoAgent.from_checkpoints(path, dmc_checkpoint, k,
                                                  seed=seed + 1),
                        PpoAgent.from_checkpoints(path, dmc_checkpoint, k,
                                                  seed=seed + 2)]
            opponents = [parse_agent_spec(spec, seed=seed + 3),
                         parse_agent_spec(spec, seed=seed + 4)]
            report = play_match(team, opponents, n_games, seed=seed + step)
            row = {"checkpoint": path, "step": step, "opponent": spec,
                   "winrate": report.winrate_a, "ci95": list(report.ci95),
                   "n_games": n_games}
            series.append(row)
            metrics.write({"event": "eval", **row})
    metrics.close()
    return series


# ---------------------------------------------------------------------------
# TCP transport: 4-byte big-endian length + pickled message dict.
# Messages: {"kind": "samples", "trajs": [...]} -> {"ok": true}
#           {"kind": "pull_params"} -> {"params": [...], "version": v,
#                                       "checksum": c}
# ---------------------------------------------------------------------------

def send_frame(sock: socket.socket, obj):
    payload = pickle.dumps(obj, protocol=pickle.HIGHEST_PROTOCOL)
    sock.sendall(struct.pack(">I", len(payload)) + payload)


def recv_frame(sock: socket.socket):
    header = _recv_exact(sock, 4)
    if header is None:
        return None
    (length,) = struct.unpack(">I", header)
    payload = _recv_exact(sock, length)
    if payload is None:
        raise ConnectionError("peer closed mid-frame")
    return pickle.loads(payload)


def _recv_exact(sock: socket.socket, n: int):
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None if not buf else buf
        buf += chunk
    return buf


class LearnerServer:
    """Accepts actor connections; feeds samples into the channel and
    serves parameter pulls from the bulletin."""

    def __init__(self, address: tuple, channel: SampleChannel,
                 bulletin: ParameterBulletin):
        runtime = self

        class Handler(socketserver.BaseRequestHandler):
            def handle(self):
                while True:
                    try:
                        msg = recv_frame(self.request)
                    except (ConnectionError, OSError):
                        return
                    if msg is None:
                        return
                    if msg["kind"] == "samples":
                        runtime.channel.put(msg["trajs"])
                        send_frame(self.request, {"ok": True})
                    elif msg["kind"] == "pull_params":
                        params, version = runtime.bulletin.pull()
                        blob = None
                        if params is not None:
                            blob = [np.asarray(p) for p in params]
                        send_frame(self.request, {
                            "params": blob, "version": version,
                            "checksum": _params_checksum(blob) if blob else 0,
                        })
                    else:
                        send_frame(self.request, {"error": "unknown kind"})

        class Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self.channel = channel
        self.bulletin = bulletin
        self.server = Server(address, Handler)
        self.address = self.server.server_address
        self._thread = threading.Thread(
            target=self.server.serve_forever, daemon=True)

    def start(self):
        self._thread.start()

    def stop(self):
        self.server.shutdown()
        self.server.server_close()


class LearnerClient:
    """Actor-side connection with bounded reconnect."""

    def __init__(self, address: str, retries: int = 5, backoff: float = 0.2):
        host, _, port = address.rpartition(":")
        self.addr = (host or "127.0.0.1", int(port))
        self.retries = retries
        self.backoff = backoff
        self.sock = None
        self._connect()

    def _connect(self):
        delay = self.backoff
        for attempt in range(self.retries):
            try:
                self.sock = socket.create_connection(self.addr, timeout=30.0)
                return
            except OSError:
                if attempt == self.retries - 1:
                    raise
                time.sleep(delay)
                delay *= 2

    def _call(self, msg):
        try:
            send_frame(self.sock, msg)
            return recv_frame(self.sock)
        except (ConnectionError, OSError):
            self._connect()
            send_frame(self.sock, msg)
            return recv_frame(self.sock)

    def send_samples(self, trajs):
        reply = self._call({"kind": "samples", "trajs": trajs})
        if not reply or not reply.get("ok"):
            raise ConnectionError("learner rejected samples")

    def pull_params(self):
        reply = self._call({"kind": "pull_params"})
        if reply is None:
            raise ConnectionError("learner closed during pull")
        params, version = reply["params"], reply["version"]
        if params is not None:
            if _params_checksum(params) != reply["checksum"]:
                raise TornSnapshot("parameter frame failed checksum")
        return params, version

    def close(self):
        if self.sock is not None:
            try:
                self.sock.close()
            except OSError:
                pass


def serve_learner(cfg: RuntimeConfig, address: str, total_batches: int):
    """Blocking learner process entry: consume TCP samples until
    total_batches have arrived, checkpoint, and return stats."""
    host, _, port = address.rpartition(":")
    learner = make_learner(cfg)
    bulletin = ParameterBulletin()
    channel = SampleChannel(cfg.channel_capacity)
    server = LearnerServer((host or "127.0.0.1", int(port)), channel, bulletin)
    server.start()
    metrics = MetricsWriter(cfg.metrics_path)
    stats = TrainingStats()
    t0 = time.time()
    try:
        while stats.episodes < total_batches:
            batch = channel.get(timeout=120.0)
            if batch is None:
                raise RuntimeError("sample channel starved for 120s")
            if batch is SampleChannel.CLOSE:
                break
            stats.episodes += 1
            stats.trajectories_received += len(batch)
            if learner.receive(batch):
                bulletin.publish(learner.net.params, learner.version)
                metrics.write(_update_record(learner, t0))
    finally:
        server.stop()
        metrics.close()
    stats.receptions = learner.receptions
    stats.updates = learner.updates
    stats.version = learner.version
    if learner.updates > 0:
        stats.checkpoints.append(write_checkpoint(cfg, learner))
    return stats


def serve_actors(cfg: RuntimeConfig, address: str, synthetic: bool = False):
    """Blocking actor process entry: each worker plays its episode quota
    and ships trajectories to the learner over TCP."""
    frozen = _load_frozen_dmc(cfg)

    def loop(actor_id: int):
        client = LearnerClient(address)
        net = cfg.train_cfg().make_net()
        seen = 0
        for episode in range(cfg.episodes_per_actor):
            params, version = client.pull_params()
            if params is not None and version > seen:
                net.load_params(params)
                seen = version
            rng = _actor_rng(cfg, actor_id, episode)
            if synthetic:
                trajs = synthetic_trajectories(cfg, actor_id, episode)
            else:
                trajs, _ = _play_episode(cfg, net, frozen, rng)
            client.send_samples(trajs)
        client.close()

    threads = [threading.Thread(target=loop, args=(i,), daemon=True)
               for i in range(cfg.n_actors)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
