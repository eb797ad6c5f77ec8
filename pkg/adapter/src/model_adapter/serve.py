"""Line-protocol server: feature lines in, one label token per line out.

Protocol: each input line holds the feature values of one sample as
decimal numbers joined by commas, terminated by a newline.  For every
input line the adapter writes exactly one label token line, in order, and
flushes after each burst of input it managed to read in one go (so large
batches get batched predictions, while single lines still get immediate
answers).  At end-of-input the adapter exits 0.  A malformed input line
is a protocol violation: the adapter writes a diagnostic to standard
error and exits 3 rather than guessing.
"""

from __future__ import annotations

import argparse
import os
import select
import sys
from dataclasses import dataclass

import numpy as np

from .models import load_model

_CHUNK = 1 << 16

# token rule of the protocol: no whitespace, commas, or newlines
_FORBIDDEN = set(" \t\r\n,")


@dataclass(frozen=True)
class AdapterConfig:
    model_path: str
    n_features: int
    labels: tuple[str, ...] | None = None


class ProtocolViolation(Exception):
    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")


def _parse_lines(lines, first_line_no, n_features):
    rows = np.empty((len(lines), n_features))
    for i, line in enumerate(lines):
        cells = line.split(",")
        if len(cells) != n_features:
            raise ProtocolViolation(
                first_line_no + i,
                f"expected {n_features} features, got {len(cells)}",
            )
        try:
            rows[i] = [float(c) for c in cells]
        except ValueError:
            raise ProtocolViolation(
                first_line_no + i, f"cannot parse {line!r}"
            ) from None
    return rows


def _is_class_index(value):
    if isinstance(value, (int, np.integer)):
        return True
    return isinstance(value, (float, np.floating)) and float(value).is_integer()


def _tokenize(values, labels, first_line_no):
    tokens = []
    for i, value in enumerate(values):
        if labels is not None and _is_class_index(value):
            index = int(value)
            if not 0 <= index < len(labels):
                raise ProtocolViolation(
                    first_line_no + i,
                    f"model produced class {index}, but only "
                    f"{len(labels)} labels were mapped",
                )
            token = labels[index]
        elif isinstance(value, (float, np.floating)):
            token = repr(float(value))
        else:
            token = str(value)
        if not token or any(ch in _FORBIDDEN for ch in token):
            raise ProtocolViolation(
                first_line_no + i, f"model produced invalid label token {token!r}"
            )
        tokens.append(token)
    return tokens


def serve(config: AdapterConfig) -> int:
    """Run the protocol loop until end-of-input; returns the exit status."""
    model = load_model(config.model_path)
    stdin_fd = sys.stdin.fileno()
    out = sys.stdout
    buffer = b""
    line_no = 0
    eof = False
    while not eof:
        chunk = os.read(stdin_fd, _CHUNK)
        if not chunk:
            break
        buffer += chunk
        # drain whatever else already arrived, then answer the whole burst
        while True:
            ready, _, _ = select.select([stdin_fd], [], [], 0)
            if not ready:
                break
            chunk = os.read(stdin_fd, _CHUNK)
            if not chunk:
                eof = True
                break
            buffer += chunk
        *lines, buffer = buffer.split(b"\n")
        if lines:
            text = [line.decode("utf-8") for line in lines]
            rows = _parse_lines(text, line_no + 1, config.n_features)
            predictions = model.predict(rows)
            for token in _tokenize(predictions, config.labels, line_no + 1):
                out.write(token + "\n")
            out.flush()
            line_no += len(lines)
    if buffer:
        raise ProtocolViolation(line_no + 1, "input ended mid-line (no newline)")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rwrobust-adapter", description=__doc__
    )
    parser.add_argument("--model", required=True, help="pickled model artifact")
    parser.add_argument("--features", required=True, type=int, help="features per line")
    parser.add_argument(
        "--labels",
        default=None,
        help="comma-separated tokens mapping class index to label, e.g. neg,pos",
    )
    args = parser.parse_args(argv)
    labels = tuple(args.labels.split(",")) if args.labels else None
    config = AdapterConfig(
        model_path=args.model, n_features=args.features, labels=labels
    )
    try:
        return serve(config)
    except ProtocolViolation as exc:
        print(f"rwrobust-adapter: protocol violation: {exc}", file=sys.stderr)
        return 3
    except BrokenPipeError:
        return 0
    except Exception as exc:  # loading failures, model errors
        print(f"rwrobust-adapter: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
