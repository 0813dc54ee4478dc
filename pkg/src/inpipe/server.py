"""Teleoperation server: raw TCP framing plus a browser socket bridge.

One tick thread owns the :class:`~inpipe.mission.World`; any number of
session threads (one reader + one writer per connection) funnel decoded
command frames into a single FIFO queue tagged with a session id, and
telemetry fans out to every connected session.  The same frames travel
over both transports:

* port 4857 — raw byte stream, frames back to back;
* port 4858 — socket bridge for browsers, one frame per binary message.

Exactly one session may hold the operator lock (msg 0x0D): commands
from other sessions are refused with NACK LOCKED, except ESTOP and
HEARTBEAT which are always honored.  While the lock is held the
autopilot is suspended.  If the holder disconnects, the lock releases
and the actuators are zeroed within one tick (dead-man behavior); both
transitions are recorded in the replay log so logged runs stay
reproducible.
"""

from __future__ import annotations

import math
import queue
import socket
import threading
import time

from . import mission, protocol
from .replay import ReplayWriter

#: Ticks between periodic JOINT_MAP telemetry while wall-pressed.
JOINT_MAP_PERIOD_TICKS = 25

#: Outbound frames buffered per session before it is considered stalled.
OUTBOX_LIMIT = 20000

_CLOSE = None  # outbox sentinel


def _clamp(value: int, lo: int, hi: int) -> int:
    return lo if value < lo else hi if value > hi else value


def state_message(world: mission.World, lock_taken: bool) -> protocol.StateTelemetry:
    """Snapshot the world into one STATE telemetry message.

    Fixed-point scales are documented on
    :class:`~inpipe.protocol.StateTelemetry`; every field saturates at
    its integer range rather than wrapping.
    """
    state = world.state
    flags = 0
    if state.arm.deployed:
        flags |= 0x01
    if lock_taken:
        flags |= 0x02
    if world.tool_busy():
        flags |= 0x04
    if world.autopilot_active():
        flags |= 0x08
    legs = tuple(
        (
            _clamp(round(leg.extension_mm * 10.0), 0, 0xFFFF),
            _clamp(round(leg.contact_force_n * 10.0), 0, 0xFFFF),
        )
        for leg in state.legs
    )
    reading = world.sensor_reading()
    if math.isinf(reading):
        sensor = protocol.SENSOR_NO_JOINT
    else:
        sensor = _clamp(round(reading * 100.0), -(2**31), 2**31 - 2)
    return protocol.StateTelemetry(
        tick=state.tick_index & 0xFFFFFFFF,
        axial_01mm=_clamp(round(state.pose.axial_mm * 10.0), 0, 0xFFFFFFFF),
        lateral_001mm=_clamp(round(state.pose.lateral_mm * 100.0), -32768, 32767),
        yaw_01mrad=_clamp(round(state.pose.yaw_rad * 1.0e4), -32768, 32767),
        mode=int(state.mode),
        mission=int(state.mission),
        tool_kind=0xFF if state.tool_kind is None else int(state.tool_kind),
        flags=flags,
        legs=legs,
        tool_r_01mm=_clamp(round(state.tool.r_mm * 10.0), 0, 0xFFFF),
        tool_theta_centideg=round(math.degrees(state.tool.theta_rad) * 100.0) % 36000,
        tool_z_01mm=_clamp(round(state.tool.z_mm * 10.0), -32768, 32767),
        cartridge_mm3=_clamp(state.cartridge.fill_umm3 // 1000, 0, 0xFFFFFFFF),
        sensor_001mm=sensor,
    )


def joint_map_message(world: mission.World) -> protocol.JointMap | None:
    """Quantize the active joint's sector maps to 0-255, if any."""
    joint = world.active_joint
    idx = world.active_joint_idx
    if joint is None or idx is None or joint.seal is None:
        return None
    corrosion = bytes(
        _clamp(round(level * 255.0), 0, 255) for level in joint.corrosion.levels
    )
    coverage = bytes(
        _clamp(round(min(1.0, dep / req if req > 0 else 1.0) * 255.0), 0, 255)
        for dep, req in zip(joint.seal.deposits_umm3, joint.seal.required_umm3)
    )
    return protocol.JointMap(joint_index=idx, corrosion=corrosion, coverage=coverage)


class _QueueItem:
    """One unit of work for the tick thread, FIFO across all sessions."""

    __slots__ = ("kind", "session_id", "seq", "msg")

    def __init__(self, kind: str, session_id: int, seq: int = 0, msg=None) -> None:
        self.kind = kind  # "cmd" | "override" | "safe_stop"
        self.session_id = session_id
        self.seq = seq
        self.msg = msg


class _Session:
    """Bookkeeping for one connected client, transport-agnostic."""

    def __init__(self, session_id: int) -> None:
        self.id = session_id
        self.outbox: queue.Queue = queue.Queue(maxsize=OUTBOX_LIMIT)
        self.closed = False

    def send(self, msg) -> None:
        """Queue one telemetry message; a stalled session is cut loose."""
        if self.closed:
            return
        try:
            self.outbox.put_nowait(msg)
        except queue.Full:
            self.closed = True
            try:
                self.outbox.put_nowait(_CLOSE)
            except queue.Full:
                pass

    def close(self) -> None:
        if not self.closed:
            self.closed = True
        self.outbox.put(_CLOSE)


class SimServer:
    """Own the world, the tick loop, and every connected session.

    Args:
        world: Freshly constructed world (autopilot on or off).
        tps: Tick rate in ticks per second; 0 means run unpaced
            (testing only — wall-clock no longer tracks sim time).
        replay_writer: Optional open :class:`ReplayWriter`; every applied
            command and lock transition is recorded through it.
    """

    def __init__(
        self,
        world: mission.World,
        tps: float = 50.0,
        replay_writer: ReplayWriter | None = None,
    ) -> None:
        self.world = world
        self.tps = tps
        self.writer = replay_writer
        self.commands: queue.Queue[_QueueItem] = queue.Queue()
        self.sessions: dict[int, _Session] = {}
        self._sessions_mutex = threading.Lock()
        self._lock_mutex = threading.Lock()
        self.lock_holder: int | None = None
        self._next_session_id = 1
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._tcp_listener: socket.socket | None = None
        self._ws_server = None

    # -- session registry ---------------------------------------------------

    def _register(self) -> _Session:
        with self._sessions_mutex:
            session = _Session(self._next_session_id)
            self._next_session_id += 1
            self.sessions[session.id] = session
        return session

    def _unregister(self, session: _Session) -> None:
        with self._sessions_mutex:
            self.sessions.pop(session.id, None)
        released = False
        with self._lock_mutex:
            if self.lock_holder == session.id:
                self.lock_holder = None
                released = True
        if released:
            # Dead-man: zero actuators and resume autopilot within a tick.
            self.commands.put(_QueueItem("safe_stop", session.id))
            self.commands.put(_QueueItem("override", session.id, msg=False))
        session.close()

    def _fanout(self, msg) -> None:
        with self._sessions_mutex:
            targets = list(self.sessions.values())
        for session in targets:
            session.send(msg)

    # -- inbound frame handling (runs on session reader threads) -------------

    def _handle_frame(self, session: _Session, frame: protocol.DecodedFrame) -> None:
        msg = frame.msg
        seq = frame.seq
        if isinstance(msg, protocol.UnknownMessage):
            session.send(protocol.AckNack(seq, protocol.NACK_UNKNOWN_TYPE))
            return
        if isinstance(msg, protocol.MalformedMessage):
            session.send(protocol.AckNack(seq, msg.status))
            return
        if isinstance(msg, protocol.Heartbeat):
            session.send(protocol.AckNack(seq, 0))
            return
        if isinstance(msg, protocol.Lock):
            self._handle_lock(session, seq, msg.acquire)
            return
        if not isinstance(msg, protocol.Estop):
            with self._lock_mutex:
                holder = self.lock_holder
            if holder != session.id:
                session.send(
                    protocol.AckNack(seq, protocol.NACK_LOCKED)
                )
                return
        self.commands.put(_QueueItem("cmd", session.id, seq, msg))

    def _handle_lock(self, session: _Session, seq: int, acquire: bool) -> None:
        with self._lock_mutex:
            if acquire:
                if self.lock_holder is None:
                    self.lock_holder = session.id
                    changed = True
                elif self.lock_holder == session.id:
                    changed = False  # already ours, idempotent
                else:
                    session.send(protocol.AckNack(seq, protocol.NACK_LOCKED))
                    return
            else:
                if self.lock_holder == session.id:
                    self.lock_holder = None
                    changed = True
                elif self.lock_holder is None:
                    changed = False  # releasing a free lock is a no-op
                else:
                    session.send(protocol.AckNack(seq, protocol.NACK_LOCKED))
                    return
        if changed:
            self.commands.put(_QueueItem("override", session.id, msg=acquire))
        session.send(protocol.AckNack(seq, 0))

    # -- tick loop ------------------------------------------------------------

    def _drain(self) -> list[_QueueItem]:
        items = []
        while True:
            try:
                items.append(self.commands.get_nowait())
            except queue.Empty:
                return items

    def _tick_once(self) -> None:
        world = self.world
        tick = world.state.tick_index
        if self.writer is not None:
            self.writer.checkpoint_if_due(world)
        batch = []
        for item in self._drain():
            if item.kind == "override":
                world.manual_override = bool(item.msg)
                if self.writer is not None:
                    self.writer.record_override(tick, bool(item.msg))
            elif item.kind == "safe_stop":
                world.safe_stop()
                if self.writer is not None:
                    self.writer.record_safe_stop(tick)
            else:
                batch.append((item.session_id, item.seq, item.msg))
                if self.writer is not None:
                    self.writer.record_frame(
                        tick, item.session_id, protocol.encode(item.msg, item.seq)
                    )
        results = world.tick(batch)

        with self._sessions_mutex:
            sessions = dict(self.sessions)
        for result in results:
            session = sessions.get(result.session_id)
            if session is not None:
                session.send(
                    protocol.AckNack(result.seq, result.status, result.detail)
                )
        if sessions:
            with self._lock_mutex:
                lock_taken = self.lock_holder is not None
            state_msg = state_message(world, lock_taken)
            for session in sessions.values():
                session.send(state_msg)
            if world.pending_map_update or (
                world.state.tick_index % JOINT_MAP_PERIOD_TICKS == 0
            ):
                map_msg = joint_map_message(world)
                if map_msg is not None:
                    world.pending_map_update = False
                    for session in sessions.values():
                        session.send(map_msg)
        for event in world.pending_events:
            self._fanout(protocol.Event(event.code, event.detail))
        world.pending_events.clear()

    def _tick_loop(self) -> None:
        period = 1.0 / self.tps if self.tps > 0 else 0.0
        next_deadline = time.perf_counter()
        try:
            while not self._stop.is_set():
                self._tick_once()
                if period > 0.0:
                    next_deadline += period
                    delay = next_deadline - time.perf_counter()
                    if delay > 0:
                        time.sleep(delay)
                    else:
                        next_deadline = time.perf_counter()  # fell behind; don't burst
        finally:
            world = self.world
            tick = world.state.tick_index
            world.safe_stop()
            if self.writer is not None:
                # A record at tick N applies before tick N runs, so run one
                # more tick to keep the final safe-stop inside the run.
                self.writer.record_safe_stop(tick)
                world.tick([])
                self.writer.checkpoint_if_due(world)
                self.writer.close(world)

    # -- raw TCP transport ----------------------------------------------------

    def _tcp_accept_loop(self) -> None:
        listener = self._tcp_listener
        assert listener is not None
        while not self._stop.is_set():
            try:
                conn, _addr = listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return  # listener closed during shutdown
            thread = threading.Thread(
                target=self._tcp_session, args=(conn,), daemon=True
            )
            thread.start()

    def _tcp_session(self, conn: socket.socket) -> None:
        session = self._register()
        conn.settimeout(0.5)

        def writer_loop() -> None:
            try:
                seq = 0
                while True:
                    msg = session.outbox.get()
                    if msg is _CLOSE:
                        return
                    conn.sendall(protocol.encode(msg, seq))
                    seq = (seq + 1) & 0xFFFF
            except OSError:
                session.closed = True

        writer = threading.Thread(target=writer_loop, daemon=True)
        writer.start()
        decoder = protocol.Decoder()
        try:
            while not self._stop.is_set() and not session.closed:
                try:
                    data = conn.recv(4096)
                except socket.timeout:
                    continue
                except OSError:
                    break
                if not data:
                    break
                for frame in decoder.feed(data):
                    self._handle_frame(session, frame)
        finally:
            self._unregister(session)
            writer.join(timeout=2.0)
            try:
                conn.close()
            except OSError:
                pass

    # -- browser socket bridge --------------------------------------------------

    def _ws_session(self, connection) -> None:
        session = self._register()

        def writer_loop() -> None:
            try:
                seq = 0
                while True:
                    msg = session.outbox.get()
                    if msg is _CLOSE:
                        return
                    connection.send(protocol.encode(msg, seq))
                    seq = (seq + 1) & 0xFFFF
            except Exception:
                session.closed = True

        writer = threading.Thread(target=writer_loop, daemon=True)
        writer.start()
        decoder = protocol.Decoder()
        try:
            while not self._stop.is_set() and not session.closed:
                try:
                    data = connection.recv(timeout=0.5)
                except TimeoutError:
                    continue
                except Exception:
                    break
                if isinstance(data, str):
                    data = data.encode("utf-8")
                for frame in decoder.feed(data):
                    self._handle_frame(session, frame)
        finally:
            self._unregister(session)
            writer.join(timeout=2.0)
            try:
                connection.close()
            except Exception:
                pass

    # -- lifecycle -------------------------------------------------------------

    def start(
        self,
        host: str = "127.0.0.1",
        port: int = 4857,
        bridge_port: int = 4858,
    ) -> None:
        """Bind both transports and start the tick loop.

        Raises:
            OSError: a port is already in use (nothing is left running).
        """
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            listener.bind((host, port))
            listener.listen(8)
        except OSError:
            listener.close()
            raise
        # A blocked accept() would pin the listening socket past close(),
        # keeping the port busy after stop(); poll instead.
        listener.settimeout(0.5)
        self._tcp_listener = listener

        from websockets.sync.server import serve as ws_serve

        try:
            self._ws_server = ws_serve(self._ws_session, host, bridge_port)
        except OSError:
            listener.close()
            self._tcp_listener = None
            raise

        for target in (
            self._tick_loop,
            self._tcp_accept_loop,
            self._ws_server.serve_forever,
        ):
            thread = threading.Thread(target=target, daemon=True)
            thread.start()
            self._threads.append(thread)

    def stop(self) -> None:
        """Shut down cleanly: stop ticking, flush the log, drop sessions."""
        if self._stop.is_set():
            return
        self._stop.set()
        if self._tcp_listener is not None:
            try:
                self._tcp_listener.close()
            except OSError:
                pass
        if self._ws_server is not None:
            self._ws_server.shutdown()
        with self._sessions_mutex:
            sessions = list(self.sessions.values())
        for session in sessions:
            session.close()
        for thread in self._threads:
            thread.join(timeout=5.0)

    def wait(self, timeout: float | None = None) -> bool:
        """Block until stop() is called (e.g. from a signal handler)."""
        return self._stop.wait(timeout)
