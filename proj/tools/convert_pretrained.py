#!/usr/bin/env python3
"""Convert a GPT-2 family safetensors checkpoint to the TLLMW001 container.

Tensor names are written exactly as they appear in the checkpoint; the
importer maps them to its own layout and initializes the classifier head
itself. GPT-2 Conv1D weights are already stored [in, out], so no transposes
are needed.

Usage: convert_pretrained.py model.safetensors out.bin [--config config.json]
"""

import argparse
import json
import struct
import sys

import numpy as np

MAGIC = b"TLLMW001"


def read_safetensors(path):
    with open(path, "rb") as f:
        (hlen,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(hlen))
        payload = f.read()
    out = {}
    for name, entry in header.items():
        if name == "__metadata__":
            continue
        start, end = entry["data_offsets"]
        raw = payload[start:end]
        dtype = entry["dtype"]
        if dtype == "F32":
            arr = np.frombuffer(raw, dtype=np.float32)
        elif dtype == "F16":
            arr = np.frombuffer(raw, dtype=np.float16).astype(np.float32)
        elif dtype == "BF16":
            u = np.frombuffer(raw, dtype=np.uint16).astype(np.uint32) << 16
            arr = u.view(np.float32)
        else:
            raise SystemExit(f"unsupported dtype {dtype} for {name}")
        out[name] = arr.reshape(entry["shape"])
    return out


def strip_prefix(name):
    return name[len("transformer."):] if name.startswith("transformer.") else name


def write_container(tensors, config, path):
    table = []
    offset = 0
    ordered = sorted(tensors.items())
    for name, arr in ordered:
        table.append({
            "name": name,
            "dtype": "f32",
            "shape": list(arr.shape),
            "byte_offset": offset,
        })
        offset += arr.size * 4
    header = json.dumps({"config": config, "tensors": table}).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        for _, arr in ordered:
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("checkpoint", help="safetensors checkpoint")
    ap.add_argument("output", help="output container path")
    ap.add_argument("--config", help="optional model config JSON to embed")
    args = ap.parse_args()

    tensors = {strip_prefix(k): v for k, v in read_safetensors(args.checkpoint).items()}
    # attention masking buffers are not parameters
    tensors = {k: v for k, v in tensors.items() if not k.endswith("attn.bias") or v.ndim == 1}
    config = {}
    if args.config:
        with open(args.config) as f:
            config = json.load(f)
    write_container(tensors, config, args.output)
    print(f"wrote {len(tensors)} tensors to {args.output}", file=sys.stderr)


if __name__ == "__main__":
    main()
