"""IEEE Common Data Format case files and the network model built from them.

Only the fields needed for DC power flow are read: bus numbers, bus types,
loads, generation, branch reactances and MVA ratings.  Column positions follow
the 1973 common format (title card, ``BUS DATA FOLLOWS`` ... ``-999``,
``BRANCH DATA FOLLOWS`` ... ``-999``).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

GENERATOR_BUS = "generator-bus"
AGGREGATOR_BUS = "aggregator-bus"
TRANSIT_BUS = "transit"


class CdfParseError(ValueError):
    """Malformed CDF text; carries the 1-based line number."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class GridValidationError(ValueError):
    """Structurally valid file describing an inconsistent network."""


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str = TRANSIT_BUS
    attached_entity: int | None = None
    load_mw: float = 0.0
    gen_mw: float = 0.0
    cdf_type: int = 0
    name: str = ""


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    reactance: float
    nominal_capacity: float
    current_capacity: float


@dataclass(frozen=True)
class GridModel:
    """Immutable network: buses, lines and the entity-to-bus mapping.

    ``generator_buses[g]`` is the bus id hosting generator ``g`` and
    ``aggregator_buses[i]`` the bus id hosting aggregator ``i``.
    """

    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    generator_buses: tuple[int, ...] = ()
    aggregator_buses: tuple[int, ...] = ()
    name: str = ""

    def __post_init__(self):
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise GridValidationError(f"duplicate bus ids: {dup}")
        known = set(ids)
        for ln in self.lines:
            if ln.from_bus not in known or ln.to_bus not in known:
                raise GridValidationError(
                    f"line {ln.from_bus}-{ln.to_bus} references unknown bus")
            if ln.reactance <= 0:
                raise GridValidationError(
                    f"line {ln.from_bus}-{ln.to_bus} has nonpositive reactance")
            if not (0 < ln.current_capacity <= ln.nominal_capacity):
                raise GridValidationError(
                    f"line {ln.from_bus}-{ln.to_bus} capacity out of range")
        hosts = list(self.generator_buses) + list(self.aggregator_buses)
        for b in hosts:
            if b not in known:
                raise GridValidationError(f"entity mapped to unknown bus {b}")
        if len(set(hosts)) != len(hosts):
            raise GridValidationError("a bus may host at most one entity")

    @property
    def n_buses(self):
        return len(self.buses)

    @property
    def n_lines(self):
        return len(self.lines)

    @property
    def n_generators(self):
        return len(self.generator_buses)

    @property
    def n_aggregators(self):
        return len(self.aggregator_buses)

    def bus_index(self, bus_id):
        for k, b in enumerate(self.buses):
            if b.id == bus_id:
                return k
        raise KeyError(bus_id)

    @property
    def slack_bus(self):
        """Lowest-numbered generator bus unless the model has none."""
        if self.generator_buses:
            return min(self.generator_buses)
        return self.buses[0].id


def _ffloat(line, lo, hi):
    s = line[lo:hi].strip()
    return float(s) if s else 0.0


def _fint(line, lo, hi):
    s = line[lo:hi].strip()
    return int(s) if s else 0


def parse_cdf(text, default_capacity=100.0):
    """Parse IEEE CDF text into a :class:`GridModel` (no entity mapping yet).

    Branches with a zero MVA rating get ``default_capacity``.  Raises
    :class:`CdfParseError` on malformed sections and
    :class:`GridValidationError` on inconsistent data.
    """
    lines = text.splitlines()
    if not lines:
        raise CdfParseError("empty file")
    title = lines[0][45:73].strip() or lines[0].strip()

    buses = []
    branches = []
    section = None
    section_start = None
    i = 0
    for i, raw in enumerate(lines[1:], start=2):
        stripped = raw.strip()
        up = stripped.upper()
        if section is None:
            if up.startswith("BUS DATA"):
                section, section_start = "bus", i
            elif up.startswith("BRANCH DATA"):
                section, section_start = "branch", i
            elif up.startswith("END OF DATA"):
                break
            continue
        if stripped.startswith("-999") or stripped.startswith("-99"):
            section = None
            continue
        if not stripped:
            continue
        if up.startswith(("BUS DATA", "BRANCH DATA")):
            raise CdfParseError(
                f"'{section} data' section not terminated by -999 sentinel "
                f"(section starts at line {section_start})", i)
        if section == "bus":
            try:
                buses.append(Bus(
                    id=_fint(raw, 0, 4),
                    name=raw[5:17].strip(),
                    cdf_type=_fint(raw, 24, 26),
                    load_mw=_ffloat(raw, 40, 49),
                    gen_mw=_ffloat(raw, 59, 67),
                ))
            except ValueError as exc:
                raise CdfParseError(f"bad bus record: {exc}", i) from exc
        else:
            try:
                x = _ffloat(raw, 29, 40)
                rating = _ffloat(raw, 50, 55)
                branches.append(Line(
                    from_bus=_fint(raw, 0, 4),
                    to_bus=_fint(raw, 5, 9),
                    reactance=x,
                    nominal_capacity=rating if rating > 0 else default_capacity,
                    current_capacity=rating if rating > 0 else default_capacity,
                ))
            except ValueError as exc:
                raise CdfParseError(f"bad branch record: {exc}", i) from exc
    if section is not None:
        raise CdfParseError(
            f"'{section} data' section not terminated by -999 sentinel "
            f"(section starts at line {section_start})", len(lines))
    if not buses:
        raise CdfParseError("no BUS DATA section found")
    if not branches:
        raise CdfParseError("no BRANCH DATA section found")
    return GridModel(buses=tuple(buses), lines=tuple(branches), name=title)


def assign_entities(model, n_aggregators=None, n_generators=None):
    """Map generators and aggregators to buses.

    Generators go on CDF type 2/3 buses (PV/slack), ordered by bus id;
    aggregators on the largest-load remaining buses (ties by bus id).  Counts
    default to every eligible bus.
    """
    gen_buses = sorted(b.id for b in model.buses if b.cdf_type in (2, 3))
    if not gen_buses:
        gen_buses = sorted(b.id for b in model.buses if b.gen_mw > 0)
    if n_generators is not None:
        if n_generators > len(gen_buses):
            raise GridValidationError(
                f"asked for {n_generators} generators, case has "
                f"{len(gen_buses)} generator buses")
        gen_buses = gen_buses[:n_generators]
    taken = set(gen_buses)
    load_buses = sorted(
        (b for b in model.buses if b.id not in taken and b.load_mw > 0),
        key=lambda b: (-b.load_mw, b.id))
    if n_aggregators is not None:
        if n_aggregators > len(load_buses):
            raise GridValidationError(
                f"asked for {n_aggregators} aggregators, case has "
                f"{len(load_buses)} load buses available")
        load_buses = load_buses[:n_aggregators]
    agg_buses = tuple(b.id for b in load_buses)

    new_buses = []
    for b in model.buses:
        if b.id in gen_buses:
            kind, ent = GENERATOR_BUS, gen_buses.index(b.id)
        elif b.id in agg_buses:
            kind, ent = AGGREGATOR_BUS, agg_buses.index(b.id)
        else:
            kind, ent = TRANSIT_BUS, None
        new_buses.append(replace(b, kind=kind, attached_entity=ent))
    return replace(model, buses=tuple(new_buses),
                   generator_buses=tuple(gen_buses),
                   aggregator_buses=agg_buses)


def degrade_line(model, rng):
    """One period of line wear: restore all lines to nominal rating, then
    derate one uniformly chosen line by 10%.  Returns (new model, line index).
    """
    pick = int(rng.integers(model.n_lines))
    new_lines = []
    for k, ln in enumerate(model.lines):
        cap = ln.nominal_capacity * (0.9 if k == pick else 1.0)
        new_lines.append(replace(ln, current_capacity=cap))
    return replace(model, lines=tuple(new_lines)), pick


def with_degraded_line(model, line_index):
    """Deterministic variant of :func:`degrade_line` for a known line index;
    ``line_index`` of -1 means all lines at nominal."""
    new_lines = []
    for k, ln in enumerate(model.lines):
        cap = ln.nominal_capacity * (0.9 if k == line_index else 1.0)
        new_lines.append(replace(ln, current_capacity=cap))
    return replace(model, lines=tuple(new_lines))


def serialize_debug(model):
    """Line-oriented text dump for golden tests; stable field order."""
    out = [f"grid {model.name}"]
    for b in model.buses:
        out.append(
            f"bus {b.id} type={b.cdf_type} load={b.load_mw:.4f} "
            f"gen={b.gen_mw:.4f} kind={b.kind} entity={b.attached_entity}")
    for ln in model.lines:
        out.append(
            f"line {ln.from_bus}-{ln.to_bus} x={ln.reactance:.6f} "
            f"cap={ln.current_capacity:.4f}/{ln.nominal_capacity:.4f}")
    out.append(f"generators {list(model.generator_buses)}")
    out.append(f"aggregators {list(model.aggregator_buses)}")
    return "\n".join(out) + "\n"


def parse_debug(text):
    """Read a :func:`serialize_debug` dump back into a :class:`GridModel`."""
    buses, lines = [], []
    gens, aggs, name = (), (), ""
    for raw in text.splitlines():
        parts = raw.split()
        if not parts:
            continue
        if parts[0] == "grid":
            name = raw[5:].strip()
        elif parts[0] == "bus":
            kv = dict(p.split("=", 1) for p in parts[2:])
            ent = None if kv["entity"] == "None" else int(kv["entity"])
            buses.append(Bus(id=int(parts[1]), cdf_type=int(kv["type"]),
                             load_mw=float(kv["load"]), gen_mw=float(kv["gen"]),
                             kind=kv["kind"], attached_entity=ent))
        elif parts[0] == "line":
            fb, tb = parts[1].split("-")
            kv = dict(p.split("=", 1) for p in parts[2:])
            cur, nom = kv["cap"].split("/")
            lines.append(Line(from_bus=int(fb), to_bus=int(tb),
                              reactance=float(kv["x"]),
                              nominal_capacity=float(nom),
                              current_capacity=float(cur)))
        elif parts[0] == "generators":
            gens = tuple(int(x) for x in raw.split(None, 1)[1].strip("[] ").split(",") if x.strip())
        elif parts[0] == "aggregators":
            aggs = tuple(int(x) for x in raw.split(None, 1)[1].strip("[] ").split(",") if x.strip())
    return GridModel(buses=tuple(buses), lines=tuple(lines),
                     generator_buses=gens, aggregator_buses=aggs, name=name)
