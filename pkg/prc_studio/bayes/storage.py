import io

import pandas as pd

from prc_studio.bayes.sampler import PosteriorSamples
from prc_studio.domain.types import QualityScheme
from prc_studio.errors.errors import DatasetValidationError
from prc_studio.formatting import format_float, parse_floats


def save_samples(path: str, samples: PosteriorSamples, metadata: dict | None = None):
    metadata = {
        "scheme": str(samples.scheme),
        "seed": samples.seed,
        "proposals": samples.proposals,
        "ess": format_float(samples.ess),
        "failed": samples.failed,
        **(metadata or {}),
    }
    if samples.weights_diagnostic.size:
        metadata["weights"] = " ".join(format_float(w) for w in samples.weights_diagnostic)
    lines = [f"# {key}: {value}" for key, value in metadata.items()]
    lines.append(",".join(samples.scheme.tau_names()))
    lines.extend(",".join(format_float(v) for v in row) for row in samples.draws)
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def read_metadata(path: str) -> dict:
    metadata = {}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].partition(":")
            metadata[key.strip()] = value.strip()
    return metadata


def load_samples(path: str) -> PosteriorSamples:
    """Loads draws written by save_samples, with the importance weights of the pass that made them."""
    metadata = read_metadata(path)
    if "scheme" not in metadata:
        raise DatasetValidationError(path, ["line 1: missing `# scheme:` comment"])
    scheme = QualityScheme.parse(metadata["scheme"])

    with open(path, "r", encoding="utf-8") as f:
        frame = pd.read_csv(
            io.StringIO(f.read()), comment="#", dtype=float, float_precision="round_trip"
        )
    expected = scheme.tau_names()
    if list(frame.columns) != expected:
        raise DatasetValidationError(
            path,
            [f"header: expected columns {','.join(expected)}, got {','.join(frame.columns)}"],
        )
    if frame.empty or frame.isna().any().any():
        raise DatasetValidationError(path, ["draws: empty or non-numeric values"])

    draws = frame.to_numpy(dtype=float)
    weights = parse_floats(pd.Series(metadata.get("weights", "").split(), dtype=str))
    if weights.isna().any():
        raise DatasetValidationError(path, ["weights: non-numeric values"])
    return PosteriorSamples(
        draws=draws,
        weights_diagnostic=weights.to_numpy(dtype=float),
        seed=int(metadata.get("seed", 0)),
        scheme=scheme,
        ess=float(metadata.get("ess", draws.shape[0])),
        proposals=int(metadata.get("proposals", draws.shape[0])),
        failed=int(metadata.get("failed", 0)),
    )
