"""Line-oriented coefficient spec files.

Grammar (one construct per line; '#' starts a comment):

    h 0.5
    R0 2.0
    alpha = 1                      # constant coefficient shorthand
    coeff V1                       # open a piece section for one coefficient
    on (-inf,-1): poly 0
    on (-1,1): poly 2 0 -0.5       # c0 c1 c2 ... (low to high, degree <= 3)
    on (1,inf): poly 0
    V0 atom at 0 mass 2            # standalone atom clause
    coeff V0
    atom at 1 mass -0.5            # atoms inside a V0 section
    on (-1,1): poly 0.25

Pieces of one coefficient must tile the line contiguously from -inf to inf;
breakpoint values are implied by the adjacent pieces (evaluation at a
breakpoint is their average).  Numbers may be written as hexadecimal floats
(float.fromhex format) for exact round-trips.
"""

from __future__ import annotations

import numpy as np

from .bvcalc import PiecewiseBV, SignedMeasure
from .operator import CoefficientSpec

COEFF_NAMES = ("alpha", "beta", "b0", "b1", "V0", "V1")


class SpecParseError(Exception):
    def __init__(self, message, line_no=None):
        prefix = f"line {line_no}: " if line_no else ""
        super().__init__(prefix + message)
        self.line_no = line_no


def _number(tok, line_no):
    try:
        if "x" in tok or "X" in tok:
            return float.fromhex(tok)
        return float(tok)
    except ValueError:
        raise SpecParseError(f"bad number {tok!r}", line_no) from None


def _endpoint(tok, line_no):
    t = tok.strip()
    if t in ("-inf", "-oo"):
        return -np.inf
    if t in ("inf", "+inf", "oo", "+oo"):
        return np.inf
    return _number(t, line_no)


def parse_spec_text(text: str) -> CoefficientSpec:
    h = 1.0
    R0 = None
    pieces = {name: [] for name in COEFF_NAMES}
    constants = {}
    atoms = []
    current = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if toks[0] == "h" and len(toks) == 2:
            h = _number(toks[1], line_no)
            continue
        if toks[0] == "R0" and len(toks) == 2:
            R0 = _number(toks[1], line_no)
            continue
        if len(toks) >= 3 and toks[1] == "=" and toks[0] in COEFF_NAMES:
            constants[toks[0]] = _number(toks[2], line_no)
            continue
        if toks[0] == "coeff":
            if len(toks) != 2 or toks[1] not in COEFF_NAMES:
                raise SpecParseError(f"unknown coefficient section {line!r}", line_no)
            current = toks[1]
            continue
        if toks[0] in COEFF_NAMES and len(toks) >= 2 and toks[1] == "atom":
            name, rest = toks[0], toks[1:]
        elif toks[0] == "atom":
            if current is None:
                raise SpecParseError("atom clause outside a coefficient section", line_no)
            name, rest = current, toks
        elif toks[0] == "on":
            if current is None:
                raise SpecParseError("piece clause outside a coefficient section", line_no)
            _parse_piece(pieces[current], line, line_no)
            continue
        else:
            raise SpecParseError(f"unrecognized directive {toks[0]!r}", line_no)
        if name != "V0":
            raise SpecParseError("atoms are only allowed in V0 (the measure part)", line_no)
        if len(rest) != 5 or rest[1] != "at" or rest[3] != "mass":
            raise SpecParseError("atom clause must read 'atom at <x> mass <m>'", line_no)
        atoms.append((_number(rest[2], line_no), _number(rest[4], line_no)))

    built = {}
    for name in COEFF_NAMES:
        if pieces[name]:
            if name in constants:
                raise SpecParseError(f"{name} given both as constant and as pieces")
            built[name] = _assemble(name, pieces[name])
        elif name in constants:
            built[name] = PiecewiseBV.constant(constants[name])
    V0 = SignedMeasure(built.pop("V0", PiecewiseBV.constant(0.0)), atoms)
    kwargs = {"h": h, "V0": V0}
    if R0 is not None:
        kwargs["support_radius"] = R0
    for name in ("alpha", "beta", "b0", "b1", "V1"):
        if name in built:
            kwargs[name] = built[name]
    try:
        return CoefficientSpec(**kwargs)
    except ValueError as exc:
        raise SpecParseError(f"invalid coefficients: {exc}") from exc


def _parse_piece(bucket, line, line_no):
    head, _, tail = line.partition(":")
    rng = head[len("on"):].strip()
    if not (rng.startswith("(") and rng.endswith(")")) or "," not in rng:
        raise SpecParseError(f"piece range must look like (a,b), got {rng!r}", line_no)
    a_s, b_s = rng[1:-1].split(",", 1)
    a, b = _endpoint(a_s, line_no), _endpoint(b_s, line_no)
    if not a < b:
        raise SpecParseError(f"empty piece range ({a}, {b})", line_no)
    toks = tail.split()
    if not toks or toks[0] != "poly":
        raise SpecParseError("piece body must read 'poly c0 c1 ...'", line_no)
    coeffs = [_number(t, line_no) for t in toks[1:]]
    if not coeffs:
        raise SpecParseError("poly needs at least one coefficient", line_no)
    if len(coeffs) > 4:
        raise SpecParseError("piece degree exceeds 3", line_no)
    bucket.append((a, b, coeffs, line_no))


def _assemble(name, plist):
    plist = sorted(plist, key=lambda p: (p[0], p[1]))
    if plist[0][0] != -np.inf:
        raise SpecParseError(f"{name}: first piece must start at -inf "
                             f"(line {plist[0][3]})")
    if plist[-1][1] != np.inf:
        raise SpecParseError(f"{name}: last piece must extend to inf "
                             f"(line {plist[-1][3]})")
    bps = []
    for (a1, b1, _, l1), (a2, b2, _, l2) in zip(plist[:-1], plist[1:]):
        if b1 != a2:
            raise SpecParseError(f"{name}: pieces do not tile the line at "
                                 f"{b1} vs {a2} (lines {l1}, {l2})")
        bps.append(b1)
    return PiecewiseBV(bps, [p[2] for p in plist])


def parse_spec(path) -> CoefficientSpec:
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        raise SpecParseError(f"cannot read {path}: {exc}") from exc
    return parse_spec_text(text)


def format_spec(spec: CoefficientSpec, hex_floats=False) -> str:
    """Render a CoefficientSpec back to the file format (round-trips exactly
    with hex_floats=True)."""
    num = (lambda v: float(v).hex()) if hex_floats else (lambda v: f"{v:.17g}")
    out = [f"h {num(spec.h)}"]
    if spec.support_radius is not None:
        out.append(f"R0 {num(spec.support_radius)}")
    for name in ("alpha", "beta", "b0", "b1", "V1"):
        f = getattr(spec, name)
        out.extend(_format_bv(name, f, num))
    out.extend(_format_bv("V0", spec.V0.density, num))
    for x, m in spec.V0.atoms:
        out.append(f"V0 atom at {num(x)} mass {num(m)}")
    return "\n".join(out) + "\n"


def _format_bv(name, f: PiecewiseBV, num):
    if not f.breakpoints.size and len(f.pieces[0]) == 1:
        if f.pieces[0][0] == 0.0 and name not in ("alpha", "beta"):
            return []
        return [f"{name} = {num(f.pieces[0][0])}"]
    lines = [f"coeff {name}"]
    edges = ["-inf"] + [num(b) for b in f.breakpoints] + ["inf"]
    for i, c in enumerate(f.pieces):
        coeffs = " ".join(num(v) for v in c)
        lines.append(f"on ({edges[i]},{edges[i + 1]}): poly {coeffs}")
    return lines
