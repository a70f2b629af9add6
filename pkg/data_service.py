"""
Text formats the simulator reads and writes.

Job files: one feature map per line, the signed activation magnitudes, a
``|``, then the signed weight magnitudes; consecutive lines are grouped into
jobs of ``feature_map_count`` maps. Image and weight files are integer
matrices under a one-line header. Every CSV starts with a ``# seed=`` line.
"""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from analog_chain import flag_names, sweep_int, sweep_sac, sweep_vtc
from errors import SimulatorError
from mac_engine import KernelInput, MacJob, sweep_engine

logger = logging.getLogger(__name__)

KERNEL_SIZE = 5
SWEEP_TARGETS = ("sac", "vtc", "int", "engine")
RESULT_COLUMNS = [
    "job_id", "decoded_sum", "adc_decoded_sum", "oracle_sum",
    "analog_volts", "adc_code", "abs_error_volts", "flags",
]


class DataFormatError(SimulatorError):
    pass


def _content_lines(text):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def _ints(fields, source, lineno):
    try:
        return [int(f) for f in fields]
    except ValueError as exc:
        raise DataFormatError(f"{source}:{lineno}: {exc}") from exc


def parse_jobs(text, cfg, source="<jobs>"):
    jobs = []
    maps = []
    for lineno, line in _content_lines(text):
        left, sep, right = line.partition("|")
        if not sep:
            raise DataFormatError(f"{source}:{lineno}: expected '<activations> | <weights>'")
        activations = _ints(left.split(), source, lineno)
        weights = _ints(right.split(), source, lineno)
        if len(activations) != cfg.taps or len(weights) != cfg.taps:
            raise DataFormatError(
                f"{source}:{lineno}: need {cfg.taps} activations and {cfg.taps} weights, "
                f"got {len(activations)} and {len(weights)}"
            )
        try:
            maps.append(KernelInput.from_signed(activations, weights, cfg.codec))
        except SimulatorError as exc:
            raise DataFormatError(f"{source}:{lineno}: {exc}") from exc
        if len(maps) == cfg.feature_map_count:
            jobs.append(MacJob(tuple(maps)))
            maps = []
    if maps:
        raise DataFormatError(
            f"{source}: trailing job has {len(maps)} feature maps, expected {cfg.feature_map_count}"
        )
    return jobs


def load_jobs(path, cfg):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    jobs = parse_jobs(text, cfg, str(path))
    logger.debug(f"loaded {len(jobs)} job(s) from {path}")
    return jobs


def format_job(job):
    lines = []
    for k in job.maps:
        activations = " ".join(str(a.signed) for a in k.activations)
        weights = " ".join(str(w.signed) for w in k.weights)
        lines.append(f"{activations} | {weights}")
    return "\n".join(lines) + "\n"


def _read_matrix_file(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    lines = list(_content_lines(text))
    if not lines:
        raise DataFormatError(f"{path}: empty file")
    lineno, header = lines[0]
    return str(path), _ints(header.split(), path, lineno), lines[1:]


def load_image(path, levels):
    """``(channels, height, width)`` signed pixels, checked against ``levels``."""
    source, header, rows = _read_matrix_file(path)
    if len(header) != 4:
        raise DataFormatError(f"{source}: header must be 'channels height width levels'")
    channels, height, width, file_levels = header
    if file_levels != levels:
        raise DataFormatError(f"{source}: image levels {file_levels} != activation levels {levels}")
    if len(rows) != channels * height:
        raise DataFormatError(f"{source}: expected {channels * height} rows, got {len(rows)}")
    image = np.zeros((channels, height, width), dtype=np.int64)
    for index, (lineno, line) in enumerate(rows):
        values = _ints(line.split(), source, lineno)
        if len(values) != width:
            raise DataFormatError(f"{source}:{lineno}: expected {width} pixels, got {len(values)}")
        c, y = divmod(index, height)
        for x, value in enumerate(values):
            if abs(value) > levels:
                raise DataFormatError(
                    f"{source}: pixel (c={c}, y={y}, x={x}) magnitude {abs(value)} exceeds {levels}"
                )
        image[c, y] = values
    return image


def load_weights(path, levels):
    """``(kernels (maps, 5, 5), bias (maps,))`` signed weights."""
    source, header, rows = _read_matrix_file(path)
    if len(header) != 4 or header[1:3] != [KERNEL_SIZE, KERNEL_SIZE]:
        raise DataFormatError(f"{source}: header must be 'maps {KERNEL_SIZE} {KERNEL_SIZE} levels'")
    maps, _, _, file_levels = header
    if file_levels != levels:
        raise DataFormatError(f"{source}: weight levels {file_levels} != weight levels {levels}")
    per_map = KERNEL_SIZE + 1
    if len(rows) != maps * per_map:
        raise DataFormatError(f"{source}: expected {maps * per_map} rows, got {len(rows)}")
    kernels = np.zeros((maps, KERNEL_SIZE, KERNEL_SIZE), dtype=np.int64)
    bias = np.zeros(maps, dtype=np.int64)
    for index, (lineno, line) in enumerate(rows):
        m, r = divmod(index, per_map)
        values = _ints(line.split(), source, lineno)
        expected = 1 if r == KERNEL_SIZE else KERNEL_SIZE
        if len(values) != expected:
            raise DataFormatError(f"{source}:{lineno}: expected {expected} weights, got {len(values)}")
        for x, value in enumerate(values):
            if abs(value) > levels:
                raise DataFormatError(
                    f"{source}: weight (map={m}, row={r}, col={x}) magnitude {abs(value)} exceeds {levels}"
                )
        if r == KERNEL_SIZE:
            bias[m] = values[0]
        else:
            kernels[m, r] = values
    return kernels, bias


def convolution_jobs(image, kernels, bias, cfg):
    """One MacJob per valid (stride 1) output pixel, in row-major order."""
    channels, height, width = image.shape
    if channels != cfg.feature_map_count or kernels.shape[0] != cfg.feature_map_count:
        raise DataFormatError(
            f"{channels} image channels and {kernels.shape[0]} kernels, "
            f"expected {cfg.feature_map_count} of each"
        )
    if KERNEL_SIZE * KERNEL_SIZE + 1 != cfg.taps:
        raise DataFormatError(f"a {KERNEL_SIZE}x{KERNEL_SIZE} kernel plus bias needs {cfg.taps} taps")
    if height < KERNEL_SIZE or width < KERNEL_SIZE:
        raise DataFormatError(f"image {height}x{width} smaller than the {KERNEL_SIZE}x{KERNEL_SIZE} kernel")
    jobs = []
    for y in range(height - KERNEL_SIZE + 1):
        for x in range(width - KERNEL_SIZE + 1):
            maps = []
            for c in range(channels):
                patch = image[c, y:y + KERNEL_SIZE, x:x + KERNEL_SIZE].ravel().tolist()
                weights = kernels[c].ravel().tolist()
                maps.append(KernelInput.from_signed(
                    patch + [cfg.bias_activation], weights + [int(bias[c])], cfg.codec
                ))
            jobs.append(((y, x), MacJob(tuple(maps))))
    return jobs


def results_frame(results):
    return pd.DataFrame(
        [
            (i, r.decoded_sum, r.adc_decoded_sum, r.oracle_sum, r.analog_volts,
             r.adc_code, r.abs_error_volts, " ".join(flag_names(r.flags)))
            for i, r in enumerate(results)
        ],
        columns=RESULT_COLUMNS,
    )


def write_csv(frame, path, seed):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as handle:
            handle.write(f"# seed={seed}\n")
            frame.to_csv(handle, index=False, lineterminator="\n", float_format="%.12g")
    except OSError as exc:
        raise DataFormatError(f"cannot write {path}: {exc}") from exc
    logger.info(f"wrote {len(frame)} rows to {path}")
    return path


def write_feature_map(path, values, seed):
    path = Path(path)
    values = np.asarray(values, dtype=np.int64)
    lines = [f"# seed={seed}", f"{values.shape[0]} {values.shape[1]}"]
    lines += [" ".join(str(v) for v in row) for row in values]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise DataFormatError(f"cannot write {path}: {exc}") from exc
    logger.info(f"wrote {values.shape[0]}x{values.shape[1]} feature map to {path}")
    return path


def write_text(path, text):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise DataFormatError(f"cannot write {path}: {exc}") from exc
    return path


def sweep_frame(target, cfg, rng=None):
    """Transfer sweep of one stage, or of the whole chain for ``engine``."""
    if target == "sac":
        return sweep_sac(cfg.analog, rng)
    if target == "vtc":
        return sweep_vtc(cfg.analog, rng=rng)
    if target == "int":
        return sweep_int(cfg.analog, rng=rng)
    if target == "engine":
        return sweep_engine(cfg.analog, cfg.engine, rng)
    raise DataFormatError(f"unknown sweep target {target!r}, expected one of {', '.join(SWEEP_TARGETS)}")


def sweep_rng(target, cfg):
    """Noise source for a sweep; None when the calibration is ideal."""
    if cfg.analog.is_ideal:
        return None
    return np.random.default_rng([cfg.seed, SWEEP_TARGETS.index(target)])
