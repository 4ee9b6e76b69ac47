"""Single-file checkpoint archive.

A zip container holding ``manifest.json`` (tensor directory plus run
metadata), one raw little-endian float32 binary entry per tensor under
``tensors/``, and ``config.txt`` (the flat key = value config snapshot).
"""

from __future__ import annotations

import json
import zipfile

import numpy as np
import torch

from .config import RunConfig, config_from_pairs, parse_kv_file
from .errors import IoError

FORMAT_VERSION = 1


def _tensor_bytes(tensor: torch.Tensor) -> bytes:
    arr = tensor.detach().cpu().to(torch.float32).numpy()
    return np.ascontiguousarray(arr, dtype="<f4").tobytes()


def _tensor_from_bytes(raw: bytes, shape) -> torch.Tensor:
    arr = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
    return torch.from_numpy(arr)


def save_checkpoint(
    path: str,
    model_state: dict[str, torch.Tensor],
    config: RunConfig,
    metadata: dict,
    extra_tensors: dict[str, torch.Tensor] | None = None,
) -> None:
    """Write parameters, metadata, and side tensors into one archive.

    ``metadata`` must be JSON-serializable (vocab names, epoch, metric
    history, timeline info). ``extra_tensors`` carries non-parameter state
    such as per-timestamp representations and cluster quantities.
    """
    extra_tensors = extra_tensors or {}
    manifest = {
        "format": FORMAT_VERSION,
        "tensors": [],
        "metadata": metadata,
    }
    entries: list[tuple[str, bytes]] = []
    for group, tensors in (("param", model_state), ("extra", extra_tensors)):
        for name, tensor in tensors.items():
            entry = f"tensors/{group}/{name}.bin"
            manifest["tensors"].append(
                {
                    "name": name,
                    "group": group,
                    "shape": list(tensor.shape),
                    "dtype": "float32",
                    "entry": entry,
                }
            )
            entries.append((entry, _tensor_bytes(tensor)))

    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("manifest.json", json.dumps(manifest, indent=1, sort_keys=True))
        zf.writestr("config.txt", config.to_text())
        for entry, raw in entries:
            zf.writestr(entry, raw)


def load_checkpoint(path: str):
    """Read an archive back into (config, params, extras, metadata)."""
    try:
        zf = zipfile.ZipFile(path)
    except (OSError, zipfile.BadZipFile) as exc:
        raise IoError(f"cannot open checkpoint {path}: {exc}") from None
    with zf:
        names = set(zf.namelist())
        for required in ("manifest.json", "config.txt"):
            if required not in names:
                raise IoError(f"checkpoint {path} lacks {required}")
        manifest = json.loads(zf.read("manifest.json").decode("utf-8"))
        config_pairs = {}
        for line in zf.read("config.txt").decode("utf-8").splitlines():
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            key, _, raw = stripped.partition("=")
            config_pairs[key.strip()] = raw.strip()
        config = config_from_pairs(config_pairs)
        params: dict[str, torch.Tensor] = {}
        extras: dict[str, torch.Tensor] = {}
        for spec in manifest["tensors"]:
            tensor = _tensor_from_bytes(zf.read(spec["entry"]), spec["shape"])
            if spec["group"] == "param":
                params[spec["name"]] = tensor
            else:
                extras[spec["name"]] = tensor
        return config, params, extras, manifest["metadata"]


__all__ = ["save_checkpoint", "load_checkpoint", "parse_kv_file", "FORMAT_VERSION"]
