"""MPS text export and import for cross-checking against external solvers.

The fixed layout truncates names to 8 characters, so variables and rows
are renamed positionally (C0000001..., R0000001...) and the original-name
map is emitted alongside as ``* NAME-MAP`` comment lines; the free layout
keeps original names and widens its columns to fit.  Binary variables
travel inside INTORG/INTEND markers and get explicit BV bound records.
The importer restores original names from the map, so export -> import ->
export reproduces the text byte for byte.
"""

from __future__ import annotations

from .models import MipModel

__all__ = ["export_model", "read_mps", "name_map"]


def _fmt(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return f"{int(x)}"
    return f"{x:.10g}"


def name_map(model: MipModel) -> dict[str, str]:
    """Original -> mangled 8-character names (variables and rows)."""
    out = {}
    for i, v in enumerate(model.variables):
        out[v.name] = f"C{i + 1:07d}"
    for i, r in enumerate(model.rows):
        out[r.name] = f"R{i + 1:07d}"
    return out


def export_model(model: MipModel, fmt: str = "mps") -> str:
    """Render the model as MPS text.

    ``fmt`` is "mps"/"mps-fixed" for the classic fixed layout with mangled
    8-character names, or "mps-free" to keep original names.
    """
    if fmt in ("mps", "mps-fixed"):
        fixed = True
    elif fmt == "mps-free":
        fixed = False
    else:
        raise ValueError(f"unsupported export format {fmt!r}")

    if fixed:
        mangled = name_map(model)
        vname = [mangled[v.name] for v in model.variables]
        rname = [mangled[r.name] for r in model.rows]
        width = 10
    else:
        vname = [v.name for v in model.variables]
        rname = [r.name for r in model.rows]
        width = max([10] + [len(n) + 2 for n in vname + rname])

    def cols(*fields: str) -> str:
        return ("    " + "".join(f"{f:<{width}}" for f in fields)).rstrip()

    lines: list[str] = []
    if fixed:
        for orig, short in sorted(name_map(model).items(), key=lambda kv: kv[1]):
            lines.append(f"* NAME-MAP {short} {orig}")
    lines.append(f"{'NAME':<14}MODEL")
    lines.append("ROWS")
    lines.append(" N  COST")
    for i, r in enumerate(model.rows):
        lines.append(f" {r.sense}  {rname[i]}")

    entries: dict[int, list[tuple[str, float]]] = {j: [] for j in range(len(vname))}
    entries[model.objective].append(("COST", 1.0))
    for i, r in enumerate(model.rows):
        for j, coef in r.coeffs:
            entries[j].append((rname[i], coef))

    lines.append("COLUMNS")
    marker_open = False
    mk = 0
    for j, var in enumerate(model.variables):
        is_int = var.kind == "binary"
        if is_int and not marker_open:
            mk += 1
            lines.append(cols(f"M{mk}", "'MARKER'", "'INTORG'"))
            marker_open = True
        if not is_int and marker_open:
            mk += 1
            lines.append(cols(f"M{mk}", "'MARKER'", "'INTEND'"))
            marker_open = False
        row_entries = entries[j]
        for a in range(0, len(row_entries), 2):
            chunk = row_entries[a : a + 2]
            fields = [vname[j], chunk[0][0], _fmt(chunk[0][1])]
            if len(chunk) == 2:
                fields += [chunk[1][0], _fmt(chunk[1][1])]
            lines.append(cols(*fields))
    if marker_open:
        mk += 1
        lines.append(cols(f"M{mk}", "'MARKER'", "'INTEND'"))

    lines.append("RHS")
    for i, r in enumerate(model.rows):
        if r.rhs != 0:
            lines.append(cols("RHS", rname[i], _fmt(r.rhs)))

    lines.append("BOUNDS")
    for j, var in enumerate(model.variables):
        if var.kind == "binary":
            lines.append(" BV " + cols("BND", vname[j])[4:])
        else:
            if var.lb != 0:
                lines.append(" LO " + cols("BND", vname[j], _fmt(var.lb))[4:])
            lines.append(" UP " + cols("BND", vname[j], _fmt(var.ub))[4:])
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


def read_mps(text: str) -> MipModel:
    """Parse MPS text written by :func:`export_model`.

    Mangled names are translated back through the embedded NAME-MAP
    comments when present.
    """
    section = None
    demangle: dict[str, str] = {}
    row_sense: dict[str, str] = {}
    row_order: list[str] = []
    obj_row: str | None = None
    col_order: list[str] = []
    col_kind: dict[str, str] = {}
    col_entries: dict[str, list[tuple[str, float]]] = {}
    rhs: dict[str, float] = {}
    bounds: dict[str, dict[str, float | bool]] = {}
    in_integer = False

    for raw in text.splitlines():
        if not raw.strip():
            continue
        if raw.startswith("*"):
            parts = raw.split()
            if len(parts) == 4 and parts[1] == "NAME-MAP":
                demangle[parts[2]] = parts[3]
            continue
        token0 = raw.split()[0]
        # section headers start at column 0; data records are indented
        if raw[0] not in " \t" and token0 in (
            "NAME", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA",
        ):
            section = token0
            continue
        fields = raw.split()
        if section == "ROWS":
            sense, name = fields[0], fields[1]
            if sense == "N":
                obj_row = name
            else:
                row_sense[name] = sense
                row_order.append(name)
        elif section == "COLUMNS":
            if len(fields) >= 3 and fields[2].strip("'") in ("INTORG", "INTEND"):
                in_integer = fields[2].strip("'") == "INTORG"
                continue
            col = fields[0]
            if col not in col_entries:
                col_entries[col] = []
                col_order.append(col)
                col_kind[col] = "binary" if in_integer else "continuous"
            pairs = fields[1:]
            for a in range(0, len(pairs), 2):
                col_entries[col].append((pairs[a], float(pairs[a + 1])))
        elif section == "RHS":
            pairs = fields[1:]
            for a in range(0, len(pairs), 2):
                rhs[pairs[a]] = float(pairs[a + 1])
        elif section == "BOUNDS":
            btype, _bnd, col = fields[0], fields[1], fields[2]
            rec = bounds.setdefault(col, {})
            if btype == "BV":
                rec["bv"] = True
            elif btype == "UP":
                rec["ub"] = float(fields[3])
            elif btype == "LO":
                rec["lb"] = float(fields[3])
            else:
                raise ValueError(f"unsupported bound type {btype}")

    if obj_row is None:
        raise ValueError("no objective row")

    def orig(name: str) -> str:
        return demangle.get(name, name)

    model = MipModel()
    obj_idx = None
    for col in col_order:
        rec = bounds.get(col, {})
        name = orig(col)
        if col_kind[col] == "binary" or rec.get("bv"):
            model.add_variable(name, name, "binary", 0.0, 1.0)
        else:
            lb = float(rec.get("lb", 0.0))
            ub = float(rec.get("ub", float("inf")))
            model.add_variable(name, name, "continuous", lb, ub)
        for row, coef in col_entries[col]:
            if row == obj_row and coef == 1.0:
                obj_idx = model.index[name]
    if obj_idx is None:
        raise ValueError("objective must be a single unit-coefficient variable")
    model.objective = obj_idx

    per_row: dict[str, list[tuple[int, float]]] = {name: [] for name in row_order}
    for col in col_order:
        j = model.index[orig(col)]
        for row, coef in col_entries[col]:
            if row != obj_row:
                per_row[row].append((j, coef))
    for name in row_order:
        model.add_row(orig(name), per_row[name], row_sense[name], rhs.get(name, 0.0))
    return model
