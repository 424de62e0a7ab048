#!/usr/bin/env python3
"""Configuratie, foutklassen en uitvoer-helpers voor de coupled-turbo tools.

Een run wordt beschreven door key=value regels (bestand via --config) plus
CLI-flags; CLI wint. Breuken mogen als "a/b" geschreven worden.

Env vars (optioneel):
  COUPLED_TURBO_THREADS   aantal worker threads (default: cpu count)
  COUPLED_TURBO_CACHE     map voor transfer-tabellen (default: data/cache)
  COUPLED_TURBO_REPORTS   map voor CSV/plot-uitvoer (default: data/reports)
"""

from __future__ import annotations

import os
from fractions import Fraction
from pathlib import Path

import pandas as pd

# ── Configuratie ──────────────────────────────────────────────────────────────

ROOT_DIR    = Path(__file__).resolve().parent.parent.parent
CACHE_DIR   = Path(os.getenv("COUPLED_TURBO_CACHE", str(ROOT_DIR / "data" / "cache")))
REPORTS_DIR = Path(os.getenv("COUPLED_TURBO_REPORTS", str(ROOT_DIR / "data" / "reports")))

DEFAULT_THREADS = int(os.getenv("COUPLED_TURBO_THREADS", "0")) or (os.cpu_count() or 1)


# ── Fouten ────────────────────────────────────────────────────────────────────

class CouplingError(Exception):
    """Basisklasse voor alle fouten uit dit pakket."""


class ConfigError(CouplingError, ValueError):
    """Ongeldige of inconsistente configuratie (exit-code 1 in de CLI)."""


class InconsistentTraceError(CouplingError, RuntimeError):
    """Twee Known-waarden spreken elkaar tegen: decoder- of encoderbug."""


class NumericError(CouplingError, ArithmeticError):
    """Stationaire verdeling of integraal niet binnen tolerantie."""


# ── key=value parsing ─────────────────────────────────────────────────────────

def parse_fraction(text: str | int | float | Fraction) -> Fraction:
    """'1/4', '0.25' of 3 → Fraction. Floats worden exact omgezet via str."""
    if isinstance(text, Fraction):
        return text
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError) as e:
        raise ConfigError(f"geen geldige breuk: {text!r}") from e


def parse_bool(text: str | bool) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in {"1", "true", "yes", "ja", "on"}:
        return True
    if value in {"0", "false", "no", "nee", "off"}:
        return False
    raise ConfigError(f"geen geldige boolean: {text!r}")


def parse_float_list(text: str | list) -> list[float]:
    """'0.6,0.65,0.7' of 'start:stop:step' → lijst floats (stop inclusief)."""
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    text = str(text).strip()
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            if step <= 0:
                raise ConfigError(f"stapgrootte moet > 0 zijn: {text!r}")
            n = int(round((stop - start) / step))
            return [round(start + i * step, 12) for i in range(n + 1)]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise ConfigError(f"geen geldige lijst: {text!r}") from e


def parse_int_list(text: str | list) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError as e:
        raise ConfigError(f"geen geldige lijst: {text!r}") from e


def _family(text: str) -> str:
    value = str(text).strip().upper()
    if value not in {"PIC", "PPC"}:
        raise ConfigError(f"onbekende familie: {text!r} (verwacht PIC of PPC)")
    return value


def _choice(*options: str):
    def convert(text: str) -> str:
        value = str(text).strip().lower()
        if value not in options:
            raise ConfigError(f"ongeldige waarde {text!r} (kies uit {', '.join(options)})")
        return value
    return convert


# Alle bekende sleutels met hun conversie. Bestand en CLI gebruiken dezelfde namen.
CONFIG_KEYS = {
    "family":            _family,
    "lambda":            parse_fraction,
    "lambda_upper":      parse_fraction,
    "lambda_lower":      parse_fraction,
    "m":                 parse_int_list,
    "L":                 int,
    "K":                 int,
    "rho":               parse_fraction,
    "rate":              parse_fraction,
    "puncture_coupled":  parse_bool,
    "random_positions":  parse_bool,
    "interleaver_file":  str,
    "lambda_min":        parse_fraction,
    "lambda_max":        parse_fraction,
    "lambda_step":       parse_fraction,
    "refine_step":       parse_fraction,
    "tol":               float,
    "eps":               parse_float_list,
    "decoder":           _choice("ff-fb", "window"),
    "window":            int,
    "window_iterations": int,
    "inner_iterations":  int,
    "max_outer":         int,
    "min_errors":        int,
    "max_chains":        int,
    "seed":              int,
    "threads":           int,
    "output":            str,
    "schedule":          _choice("serial", "parallel"),
    "de_length":         int,
    "max_iter":          int,
    "grid":              int,
    "grid_step":         float,
    "points":            int,
    "p":                 float,
    "q":                 float,
    "samples":           int,
    "threshold":         float,
    "save":              str,
    "replay":            str,
}


def read_config_file(path: str | Path) -> dict[str, str]:
    """Lees key=value regels; '#' start commentaar, lege regels worden overgeslagen."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"configbestand niet gevonden: {path}")
    values: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: verwacht key=value, kreeg {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def resolve_config(file_values: dict[str, str] | None, overrides: dict | None) -> dict:
    """Voeg bestand + CLI samen (CLI wint) en converteer naar getypte waarden.

    Onbekende sleutels geven een ConfigError; None-waarden in overrides tellen niet.
    """
    merged: dict = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = sorted(set(merged) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"onbekende config-sleutel(s): {', '.join(unknown)}")
    typed = {}
    for key, value in merged.items():
        try:
            typed[key] = CONFIG_KEYS[key](value)
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(f"ongeldige waarde voor {key}: {value!r}") from e
    return typed


def format_value(value) -> str:
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (list, tuple)):
        return ",".join(format_value(v) for v in value)
    return str(value)


def config_header(config: dict) -> list[str]:
    """'# key=value' regels die elke uitvoer reproduceerbaar maken."""
    return [f"# {key}={format_value(config[key])}" for key in sorted(config)]


# ── Uitvoer ───────────────────────────────────────────────────────────────────

def output_path(name: str | None, default: str) -> Path:
    """Relatieve namen komen onder REPORTS_DIR; absolute paden blijven staan."""
    path = Path(name or default)
    if not path.is_absolute() and path.parent == Path("."):
        path = REPORTS_DIR / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_csv(df: pd.DataFrame, path: str | Path, config: dict | None = None) -> Path:
    """Schrijf df als CSV met de config als '#'-header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        for line in config_header(config or {}):
            fh.write(line + "\n")
        df.to_csv(fh, index=False, float_format="%.6g")
    return path


def read_csv(path: str | Path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def worker_count(requested: int | None) -> int:
    if requested is None or requested <= 0:
        return DEFAULT_THREADS
    return requested
