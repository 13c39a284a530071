"""Deterministic CSV, JSON and SVG output."""

import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .config import emit_config, parse_config
from .errors import ConfigurationError

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf",
           "#7f7f7f")


# -- CSV ------------------------------------------------------------------------

def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def header_lines(command, options, cfg):
    """Comment block: command, options, then the resolved configuration."""
    lines = [f"# command: {command}"]
    for key in sorted(options):
        lines.append(f"# option: {key} = {_cell(options[key])}")
    if cfg is not None:
        lines.append("# config:")
        lines.extend(("# " + ln) if ln else "#" for ln in emit_config(cfg).splitlines())
    return lines


def csv_text(columns, rows, command="", options=None, cfg=None):
    out = header_lines(command, options or {}, cfg)
    out.append(",".join(columns))
    for row in rows:
        if len(row) != len(columns):
            raise ConfigurationError("row length does not match the columns")
        out.append(",".join(_cell(x) for x in row))
    return "\n".join(out) + "\n"


def write_text(path, text):
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def read_header(source):
    """(command, options, RunConfiguration or None) from a CSV produced here."""
    if not isinstance(source, str) or "\n" not in source:
        with open(source) as fh:
            source = fh.read()
    command, options, cfg_lines, in_cfg = "", {}, [], False
    for line in io.StringIO(source):
        line = line.rstrip("\n")
        if not line.startswith("#"):
            break
        body = line[2:] if line.startswith("# ") else line[1:]
        if in_cfg:
            cfg_lines.append(body)
        elif body.startswith("command: "):
            command = body[len("command: "):]
        elif body.startswith("option: "):
            key, value = body[len("option: "):].split(" = ", 1)
            options[key] = value
        elif body == "config:":
            in_cfg = True
    cfg = parse_config("\n".join(cfg_lines) + "\n") if in_cfg else None
    return command, options, cfg


# -- JSON -----------------------------------------------------------------------

def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def json_text(obj):
    """Sorted keys, two-space indent, trailing newline; non-finite floats become null."""
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


# -- SVG ------------------------------------------------------------------------

@dataclass(frozen=True)
class PlotStyle:
    title: str = ""
    xlabel: str = "x"
    ylabel: str = "y"
    logx: bool = False
    logy: bool = False
    width: int = 640
    height: int = 420


@dataclass(frozen=True)
class Series:
    label: str
    x: tuple
    y: tuple
    dashed: bool = False
    markers: bool = True


def _as_series(s):
    if isinstance(s, Series):
        return s
    if isinstance(s, dict):
        return Series(**s)
    label, x, y = s
    return Series(label, x, y)


def _escape(text):
    return (str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
            .replace('"', "&quot;"))


def _linear_ticks(lo, hi, count=5):
    span = hi - lo
    raw = span / count
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step - 1e-9)
    last = math.floor(hi / step + 1e-9)
    return [k * step for k in range(first, last + 1)]


def _axis(values, log):
    v = np.asarray(values, dtype=float)
    if log:
        v = np.log10(v)
    lo, hi = float(np.min(v)), float(np.max(v))
    if hi - lo < 1e-12 * max(1.0, abs(hi)):
        pad = 0.5 if log else max(abs(hi) * 0.1, 0.5)
        lo, hi = lo - pad, hi + pad
    if log:
        lo, hi = math.floor(lo * 4) / 4, math.ceil(hi * 4) / 4
        ticks = [float(k) for k in range(math.ceil(lo), math.floor(hi) + 1)]
        if len(ticks) < 2:
            ticks = [lo, hi]
    else:
        ticks = _linear_ticks(lo, hi)
        lo, hi = min(lo, ticks[0]), max(hi, ticks[-1])
    return lo, hi, ticks


def _tick_label(t, log):
    if log:
        return "1e%d" % round(t) if abs(t - round(t)) < 1e-9 else "%.3g" % 10.0 ** t
    return "%.4g" % t


def svg_text(series, style=PlotStyle()):
    series = [_as_series(s) for s in series]
    if not series:
        raise ConfigurationError("nothing to plot: empty series list")
    for s in series:
        x = np.asarray(s.x, dtype=float)
        y = np.asarray(s.y, dtype=float)
        if x.size == 0 or x.shape != y.shape or x.ndim != 1:
            raise ConfigurationError(f"series {s.label!r} is empty or has mismatched x/y")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ConfigurationError(f"series {s.label!r} contains non-finite values")
        if (style.logx and np.any(x <= 0)) or (style.logy and np.any(y <= 0)):
            raise ConfigurationError(f"series {s.label!r} has non-positive values on a log axis")
    W, H = style.width, style.height
    left, right, top, bottom = 72, 20 + 150, 36, 52
    pw, ph = W - left - right, H - top - bottom
    xlo, xhi, xt = _axis(np.concatenate([np.asarray(s.x, float) for s in series]), style.logx)
    ylo, yhi, yt = _axis(np.concatenate([np.asarray(s.y, float) for s in series]), style.logy)

    def px(v):
        v = math.log10(v) if style.logx else v
        return left + (v - xlo) / (xhi - xlo) * pw

    def py(v):
        v = math.log10(v) if style.logy else v
        return top + ph - (v - ylo) / (yhi - ylo) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>']
    if style.title:
        out.append(f'<text x="{left + pw / 2:.2f}" y="22" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="14">{_escape(style.title)}</text>')
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" '
               f'stroke="black"/>')
    for t in xt:
        x = left + (t - xlo) / (xhi - xlo) * pw
        out.append(f'<line x1="{x:.2f}" y1="{top + ph}" x2="{x:.2f}" y2="{top + ph + 5}" '
                   f'stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{top + ph + 18}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="11">{_tick_label(t, style.logx)}</text>')
    for t in yt:
        y = top + ph - (t - ylo) / (yhi - ylo) * ph
        out.append(f'<line x1="{left - 5}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{y + 4:.2f}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="11">{_tick_label(t, style.logy)}</text>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{H - 12}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="12">{_escape(style.xlabel)}</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.2f}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="12" '
               f'transform="rotate(-90 16 {top + ph / 2:.2f})">{_escape(style.ylabel)}</text>')
    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(s.x, s.y))
        dash = ' stroke-dasharray="6,4"' if s.dashed else ""
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                   f'stroke-width="1.5"{dash}/>')
        if s.markers:
            for a, b in zip(s.x, s.y):
                out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="2.5" fill="{color}"/>')
        ly = top + 12 + 18 * i
        lx = left + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 22}" y2="{ly}" stroke="{color}" '
                   f'stroke-width="1.5"{dash}/>')
        out.append(f'<text x="{lx + 28}" y="{ly + 4}" font-family="sans-serif" '
                   f'font-size="11">{_escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(series, path, style=PlotStyle()):
    text = svg_text(series, style)
    write_text(path, text)
    return text
