import json
import os

from jsonschema import Draft202012Validator

from prc_studio import __version__
from prc_studio.errors.errors import ConfigurationError, DatasetValidationError
from prc_studio.estimation.em import FitResult

MODEL_FORMAT = "prc-studio-model"

schema_file = os.path.join(os.path.dirname(os.path.abspath(__file__)), "model_schema.json")


def get_schema() -> dict:
    with open(schema_file, "r") as f:
        schema = json.loads(f.read())

    Draft202012Validator.check_schema(schema)
    return schema


def dump_model(result: FitResult, manifest_id: str) -> str:
    document = {
        "format": MODEL_FORMAT,
        "version": __version__,
        "manifest": manifest_id,
        "fit": result.to_dict(),
    }
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


def save_model(path: str, result: FitResult, manifest_id: str):
    with open(path, "w", encoding="utf-8") as f:
        f.write(dump_model(result, manifest_id))


def load_model(path: str) -> FitResult:
    with open(path, "r", encoding="utf-8") as f:
        try:
            document = json.load(f)
        except json.JSONDecodeError as e:
            raise DatasetValidationError(path, [f"line {e.lineno}: {e.msg}"])

    errors = sorted(
        Draft202012Validator(get_schema()).iter_errors(document), key=lambda e: list(e.path)
    )
    if errors:
        raise DatasetValidationError(
            path, [f"{'/'.join(map(str, e.path)) or '<root>'}: {e.message}" for e in errors]
        )

    result = FitResult.from_dict(document["fit"])
    names = result.scheme.tau_names()
    if document["fit"]["names"] != names:
        raise ConfigurationError(
            len(names),
            len(document["fit"]["names"]),
            f"Model names {document['fit']['names']} don't match scheme {result.scheme}.",
        )
    if result.tau_hessian.shape != (len(names), len(names)):
        raise ConfigurationError(len(names), result.tau_hessian.shape[0])
    return result
