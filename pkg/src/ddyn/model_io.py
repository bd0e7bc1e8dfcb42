"""Text model files and the built-in 2-DoF leg.

Format::

    # comment
    [base]
    dof = 3            # 0 = fixed, 3 = planar floating (x, z, pitch)
    mass = 15
    side = 0.5
    [link]             # repeated, proximal to distal
    mass = 2
    length = 0.4
    [rotor]            # repeated, one per link
    inertia = 6.6667e-5
    torque_limit = 20  # after the reduction
    [reduction]
    N = 20 20
    [topology]
    D =
      1 0
      0 1
    [efficiency]
    eta_f = 0.8 0.7
    [pose]
    q = pi/3 pi/3
    [gravity]
    g = 9.81

Numbers may be written as simple arithmetic on ``pi``.
"""

import ast
import math
import operator
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import DdynError, ModelError
from .rigid_body import PlanarBody, RobotModel
from .transmission import EfficiencyMap, TransmissionSet


class ModelSyntaxError(ModelError):
    pass


class ModelSemanticError(ModelError):
    pass


_SECTIONS = {
    "model": ("name",),
    "base": ("dof", "mass", "side", "inertia", "hip", "chain_angle"),
    "link": ("mass", "length", "com", "inertia"),
    "rotor": ("inertia", "torque_limit"),
    "reduction": ("N",),
    "topology": ("D",),
    "efficiency": ("eta_f", "eta_b", "map"),
    "pose": ("q", "base"),
    "gravity": ("g",),
}
_REPEATED = {"link", "rotor"}

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def eval_number(token: str, line: int) -> float:
    try:
        return float(token)
    except ValueError:
        pass
    try:
        tree = ast.parse(token, mode="eval")
    except SyntaxError:
        raise ModelSyntaxError(f"not a number: {token!r}", line) from None

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        raise ModelSyntaxError(f"not a number: {token!r}", line)

    try:
        return float(ev(tree))
    except ZeroDivisionError:
        raise ModelSyntaxError(f"division by zero in {token!r}", line) from None


class _Entry:
    def __init__(self, line: int, rows: List[List[float]]):
        self.line = line
        self.rows = rows

    def scalar(self, key):
        if len(self.rows) != 1 or len(self.rows[0]) != 1:
            raise ModelSyntaxError(f"{key} expects a single number", self.line)
        return self.rows[0][0]

    def vector(self, key):
        if len(self.rows) != 1:
            raise ModelSyntaxError(f"{key} expects one row of numbers", self.line)
        return self.rows[0]

    def matrix(self, key):
        widths = {len(r) for r in self.rows}
        if len(widths) != 1:
            raise ModelSyntaxError(f"{key} rows have unequal lengths", self.line)
        return self.rows


Section = Dict[str, object]


def _tokenize(text: str) -> List[Tuple[str, int, Section]]:
    sections: List[Tuple[str, int, Section]] = []
    current: Optional[Section] = None
    pending: Optional[Tuple[str, _Entry]] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ModelSyntaxError(f"malformed section header {stripped!r}", lineno)
            name = stripped[1:-1].strip().lower()
            if name not in _SECTIONS:
                raise ModelSyntaxError(f"unknown section [{name}]", lineno)
            current = {}
            sections.append((name, lineno, current))
            pending = None
            continue
        if current is None:
            raise ModelSyntaxError("content before the first [section]", lineno)
        if "=" in stripped:
            key, value = (part.strip() for part in stripped.split("=", 1))
            section_name = sections[-1][0]
            if key not in _SECTIONS[section_name]:
                raise ModelSyntaxError(f"unknown key {key!r} in [{section_name}]", lineno)
            if key in current:
                raise ModelSyntaxError(f"duplicate key {key!r}", lineno)
            if sections[-1][0] == "model":
                current[key] = (lineno, value)
                pending = None
                continue
            entry = _Entry(lineno, [])
            if value:
                entry.rows.append([eval_number(tok, lineno) for tok in value.split()])
                pending = None
            else:
                pending = (key, entry)
            current[key] = entry
            continue
        if pending is not None and raw[:1].isspace():
            pending[1].rows.append([eval_number(tok, lineno) for tok in stripped.split()])
            continue
        raise ModelSyntaxError(f"expected 'key = value', got {stripped!r}", lineno)
    for name, lineno, content in sections:
        for key, entry in content.items():
            if isinstance(entry, _Entry) and not entry.rows:
                raise ModelSyntaxError(f"{key} has no value", entry.line)
    return sections


def parse_model(text: str) -> RobotModel:
    """Parse a model document; errors carry the offending line number."""
    sections = _tokenize(text)
    single: Dict[str, Tuple[int, Section]] = {}
    links: List[Tuple[int, Section]] = []
    rotors: List[Tuple[int, Section]] = []
    for name, lineno, content in sections:
        if name == "link":
            links.append((lineno, content))
        elif name == "rotor":
            rotors.append((lineno, content))
        elif name in single:
            raise ModelSyntaxError(f"section [{name}] appears twice", lineno)
        else:
            single[name] = (lineno, content)

    def get(section, key, kind, default=None, required=False):
        if section not in single or key not in single[section][1]:
            if required:
                where = single[section][0] if section in single else None
                raise ModelSemanticError(f"missing {key!r} in [{section}]", where)
            return default
        return getattr(single[section][1][key], kind)(key)

    def field(content, key, kind, lineno, default=None):
        if key not in content:
            if default is None:
                raise ModelSemanticError(f"missing {key!r}", lineno)
            return default
        return getattr(content[key], kind)(key)

    if not links:
        raise ModelSemanticError("model has no [link] sections")
    if len(rotors) != len(links):
        raise ModelSemanticError(
            f"{len(links)} [link] sections but {len(rotors)} [rotor] sections",
            rotors[-1][0] if rotors else links[-1][0],
        )
    m = len(links)

    try:
        link_bodies = []
        for lineno, content in links:
            mass = field(content, "mass", "scalar", lineno)
            length = field(content, "length", "scalar", lineno)
            com = field(content, "com", "scalar", lineno, length / 2.0)
            inertia = field(content, "inertia", "scalar", lineno, mass * length**2 / 12.0)
            link_bodies.append(PlanarBody(mass, inertia, length, com))

        rotor_inertia = [field(c, "inertia", "scalar", ln) for ln, c in rotors]
        limits = [c["torque_limit"].scalar("torque_limit") if "torque_limit" in c else None for _, c in rotors]
        if any(v is None for v in limits) and not all(v is None for v in limits):
            raise ModelSemanticError("torque_limit must be given for every rotor or none", rotors[0][0])
        torque_limits = None if limits[0] is None else limits

        dof = int(get("base", "dof", "scalar", 0))
        if dof not in (0, 3):
            raise ModelSemanticError(f"base dof must be 0 or 3, got {dof}", single["base"][0])
        base_mass = get("base", "mass", "scalar", 0.0, required=dof == 3)
        side = get("base", "side", "scalar", 0.0)
        base_inertia = get("base", "inertia", "scalar", base_mass * side**2 / 6.0)
        base = PlanarBody(base_mass, base_inertia, side, 0.0)
        hip = get("base", "hip", "vector", [0.0, 0.0])
        chain_angle = get("base", "chain_angle", "scalar", 0.0)

        N = get("reduction", "N", "vector", [1.0] * m)
        D = get("topology", "D", "matrix", None)
        eta_f = get("efficiency", "eta_f", "vector", [1.0] * m)
        eta_b = get("efficiency", "eta_b", "vector", None)
        table = get("efficiency", "map", "matrix", None)
        emap = EfficiencyMap(table) if table is not None else EfficiencyMap()
        for key, vec in (("N", N), ("eta_f", eta_f), ("eta_b", eta_b)):
            if vec is not None and len(vec) != m:
                raise ModelSemanticError(f"{key} has {len(vec)} entries for {m} joints")
        transmissions = TransmissionSet(N, eta_f, eta_b, D, emap)

        q = get("pose", "q", "vector", [0.0] * m)
        base_pose = get("pose", "base", "vector", [0.0, 0.0, 0.0])
        gravity = get("gravity", "g", "scalar", 9.81)
        name = single["model"][1]["name"][1] if "model" in single and "name" in single["model"][1] else "robot"

        return RobotModel(
            base=base,
            b=dof,
            links=tuple(link_bodies),
            rotor_inertias=rotor_inertia,
            transmissions=transmissions,
            gravity=gravity,
            torque_limits=torque_limits,
            chain_angle=chain_angle,
            hip_offset=tuple(hip),
            pose=q,
            base_pose=tuple(base_pose),
            name=name,
        )
    except ModelError:
        raise
    except DdynError as exc:
        # singular topology inside a document is a model defect
        raise ModelSemanticError(str(exc)) from exc


def load_model(path) -> RobotModel:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ModelError(f"cannot read model file {path}: {exc.strerror or exc}") from exc
    except UnicodeDecodeError as exc:
        raise ModelError(f"model file {path} is not UTF-8") from exc
    return parse_model(text)


def _fmt(x: float) -> str:
    return repr(float(x))


def _row(values) -> str:
    return " ".join(_fmt(v) for v in values)


def serialize_model(model: RobotModel) -> str:
    """Write a document that parses back to an identical model."""
    t = model.transmissions
    out = [f"# planar robot model: {model.name}", "[model]", f"name = {model.name}", ""]
    out += [
        "[base]",
        f"dof = {model.b}",
        f"mass = {_fmt(model.base.mass)}",
        f"side = {_fmt(model.base.length)}",
        f"inertia = {_fmt(model.base.inertia_com)}",
        f"hip = {_row(model.hip_offset)}",
        f"chain_angle = {_fmt(model.chain_angle)}",
        "",
    ]
    for link in model.links:
        out += [
            "[link]",
            f"mass = {_fmt(link.mass)}",
            f"length = {_fmt(link.length)}",
            f"com = {_fmt(link.com_offset)}",
            f"inertia = {_fmt(link.inertia_com)}",
            "",
        ]
    for i, inertia in enumerate(model.rotor_inertias):
        out += ["[rotor]", f"inertia = {_fmt(inertia)}"]
        if model.torque_limits is not None:
            out.append(f"torque_limit = {_fmt(model.torque_limits[i])}")
        out.append("")
    out += ["[reduction]", f"N = {_row(t.N)}", "", "[topology]", "D ="]
    out += [f"  {_row(r)}" for r in t.D]
    out += ["", "[efficiency]", f"eta_f = {_row(t.eta_f)}", f"eta_b = {_row(t.eta_b)}"]
    if t.efficiency_map.table is not None:
        out.append("map =")
        out += [f"  {_row(r)}" for r in t.efficiency_map.table]
    out += ["", "[pose]", f"q = {_row(model.pose)}", f"base = {_row(model.base_pose)}"]
    out += ["", "[gravity]", f"g = {_fmt(model.gravity)}", ""]
    return "\n".join(out)


CASE_STUDY = {
    "gear_ratio": 20.0,
    "torque_limit": 20.0,
    "link_mass": 2.0,
    "link_length": 0.4,
    "base_mass": 15.0,
    "base_side": 0.5,
    "eta_f": (0.8, 0.7),
    "pose": (math.pi / 3, math.pi / 3),
}


def builtin_case_study() -> RobotModel:
    """Planar 2-DoF leg on a floating square torso.

    Two 2 kg, 0.4 m uniform links driven through 20:1 serial reductions,
    20 N m peak output torque, forward efficiencies 0.8 (hip) and 0.7
    (knee), posed at q1 = q2 = pi/3. Each rotor's reflected inertia equals
    its link's COM inertia. The hip sits at the bottom centre of the torso
    and the chain hangs downward (zero angles point along -x).
    """
    cs = CASE_STUDY
    N = cs["gear_ratio"]
    link = PlanarBody.uniform_rod(cs["link_mass"], cs["link_length"])
    base = PlanarBody.uniform_square(cs["base_mass"], cs["base_side"])
    return RobotModel(
        base=base,
        b=3,
        links=(link, link),
        rotor_inertias=[link.inertia_com / N**2] * 2,
        transmissions=TransmissionSet([N, N], list(cs["eta_f"])),
        gravity=9.81,
        torque_limits=[cs["torque_limit"]] * 2,
        chain_angle=-math.pi,
        hip_offset=(0.0, -cs["base_side"] / 2.0),
        pose=list(cs["pose"]),
        base_pose=(0.0, 0.0, 0.0),
        name="case-study-leg",
    )
