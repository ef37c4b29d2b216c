"""Flat, typed key-value config files (TOML-style sections, one level deep).

Supported value types: quoted strings, integers, floats, booleans, and flat
lists of those. Writing is deterministic (sorted keys), so a config snapshot
re-serialized from the same dict is byte-identical.
"""

from __future__ import annotations

from pathlib import Path


class ConfigError(Exception):
    pass


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        escaped = v.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_format_value(x) for x in v) + "]"
    raise ConfigError(f"unsupported config value type {type(v).__name__}")


def dumps_config(cfg: dict) -> str:
    """Serialize {section: {key: value}} (or flat {key: value}) to text."""
    lines = []
    flat = {k: v for k, v in cfg.items() if not isinstance(v, dict)}
    for k in sorted(flat):
        lines.append(f"{k} = {_format_value(flat[k])}")
    for section in sorted(k for k, v in cfg.items() if isinstance(v, dict)):
        if lines:
            lines.append("")
        lines.append(f"[{section}]")
        for k in sorted(cfg[section]):
            lines.append(f"{k} = {_format_value(cfg[section][k])}")
    return "\n".join(lines) + "\n"


def _parse_scalar(tok: str, where: str):
    tok = tok.strip()
    if tok.startswith('"'):
        if not tok.endswith('"') or len(tok) < 2:
            raise ConfigError(f"unterminated string at {where}")
        return tok[1:-1].replace('\\"', '"').replace("\\\\", "\\")
    if tok in ("true", "false"):
        return tok == "true"
    try:
        return int(tok)
    except ValueError:
        pass
    try:
        return float(tok)
    except ValueError:
        raise ConfigError(f"cannot parse value {tok!r} at {where}")


def _parse_value(tok: str, where: str):
    tok = tok.strip()
    if tok.startswith("["):
        if not tok.endswith("]"):
            raise ConfigError(f"unterminated list at {where}")
        inner = tok[1:-1].strip()
        if not inner:
            return []
        return [_parse_scalar(part, where) for part in inner.split(",")]
    return _parse_scalar(tok, where)


def _strip_comment(raw: str) -> str:
    out, in_str = [], False
    for i, ch in enumerate(raw):
        if ch == '"' and (i == 0 or raw[i - 1] != "\\"):
            in_str = not in_str
        if ch == "#" and not in_str:
            break
        out.append(ch)
    return "".join(out).strip()


def loads_config(text: str) -> dict:
    cfg: dict = {}
    target = cfg
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if not section:
                raise ConfigError(f"empty section name at line {lineno}")
            cfg.setdefault(section, {})
            target = cfg[section]
            continue
        if "=" not in line:
            raise ConfigError(f"expected key = value at line {lineno}: {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"empty key at line {lineno}")
        target[key] = _parse_value(val, f"line {lineno}")
    return cfg


def save_config(cfg: dict, path) -> Path:
    path = Path(path)
    path.write_text(dumps_config(cfg))
    return path


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} not found")
    return loads_config(path.read_text())
