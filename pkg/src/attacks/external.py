"""
External attacks through a file protocol.

For each call a work directory receives:

    input.peasimg    start image and label (raw-tensor format)
    spec.json        attack spec, label, surrogate id and free-form context

The configured command runs with "{input}", "{output}", "{spec}" and "{query}"
in its arguments replaced by those paths, and must write ``output.peasimg``.
The result is read back and checked against the epsilon budget before use.

In query mode the command may also ask for victim probabilities: it writes the
image to the query path, prints the line ``query`` on stdout and reads one JSON
line from stdin, either ``{"probs": [...], "queries": n}`` or, once the budget
is spent, ``{"error": "query budget exhausted", "queries": n}``. Every answer
goes through a counting QueryOracle. Other stdout lines are logged at DEBUG.
"""

import json
import subprocess
import tempfile
import threading
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from src.attacks.models import AttackResult, AttackSpec
from src.attacks.simba import QueryOracle
from src.datasets.loaders import read_raw_tensor, write_raw_tensor
from src.nn.tensor import LabeledSample, as_image
from src.utils.common_functions import PathLike, write_json
from src.utils.config import get_external_attack_timeout
from src.utils.exceptions import (
    AttackConfigError,
    BudgetViolationError,
    DatasetError,
    ExternalAttackError,
    PeasError,
)
from src.utils.logger import get_logger

logger = get_logger(__name__)

BUDGET_TOLERANCE = 1e-6
QUERY_REQUEST = "query"


def check_budget(adversarial: np.ndarray, start: np.ndarray, epsilon: float) -> None:
    """
    Raises:
        BudgetViolationError: If the image leaves [0, 1] or the epsilon-ball around start.
    """
    if adversarial.shape != start.shape:
        raise BudgetViolationError(f"Adversarial shape {adversarial.shape} differs from start shape {start.shape}")
    if not np.all(np.isfinite(adversarial)) or adversarial.min() < 0.0 or adversarial.max() > 1.0:
        raise BudgetViolationError("Adversarial image leaves the [0, 1] pixel range")
    linf = float(np.max(np.abs(adversarial.astype(np.float64) - start.astype(np.float64)))) if start.size else 0.0
    if linf > epsilon + BUDGET_TOLERANCE:
        raise BudgetViolationError(f"Adversarial image is {linf:.6f} from its start, budget is {epsilon:.6f}")


def _command(template: List[str], work: Path) -> List[str]:
    paths = {
        "{input}": work / "input.peasimg",
        "{output}": work / "output.peasimg",
        "{spec}": work / "spec.json",
        "{query}": work / "query.peasimg",
    }
    command = []
    for arg in template:
        for placeholder, path in paths.items():
            arg = arg.replace(placeholder, str(path))
        command.append(arg)
    return command


def _prepare(spec: AttackSpec, start: np.ndarray, y: int, work: Path, surrogate: Optional[str]) -> List[str]:
    write_raw_tensor(work / "input.peasimg", LabeledSample(image=start, label=int(y)))
    sidecar = {"label": int(y), "surrogate": surrogate, "spec": spec.to_dict(), "context": spec.external.context}
    if spec.is_query_attack:
        sidecar["query"] = str(work / "query.peasimg")
        sidecar["max_queries"] = spec.external.max_queries
    write_json(work / "spec.json", sidecar)
    command = _command(list(spec.external.command), work)
    logger.debug("Running external attack: %s", " ".join(command))
    return command


def _read_output(work: Path) -> np.ndarray:
    output_path = work / "output.peasimg"
    if not output_path.is_file():
        raise ExternalAttackError(f"External attack did not write {output_path.name}")
    try:
        return read_raw_tensor(output_path).image
    except DatasetError as e:
        raise ExternalAttackError(f"Cannot read external attack output: {e}", cause=e) from e


def _run(spec: AttackSpec, start: np.ndarray, y: int, work: Path, surrogate: Optional[str]) -> np.ndarray:
    command = _prepare(spec, start, y, work, surrogate)
    timeout = spec.external.timeout or get_external_attack_timeout()
    try:
        subprocess.run(
            command,
            check=True,
            text=True,
            capture_output=True,
            timeout=timeout,
            cwd=work,
        )
    except FileNotFoundError as e:
        raise AttackConfigError(f"External attack executable not found: {command[0]}") from e
    except subprocess.TimeoutExpired as e:
        raise ExternalAttackError(f"External attack timed out after {timeout}s: {command[0]}") from e
    except subprocess.CalledProcessError as e:
        detail = (e.stderr or "").strip().splitlines()[-1:] or [""]
        raise ExternalAttackError(
            f"External attack returned exit code {e.returncode}: {detail[0]}"
        ) from e
    return _read_output(work)


def _serve_queries(
    process: subprocess.Popen,
    oracle: QueryOracle,
    query_path: Path,
    max_queries: int,
) -> Tuple[int, Optional[np.ndarray], Optional[np.ndarray]]:
    """
    Answer query requests until the command closes its stdout.

    Returns:
        (queries answered, last queried image, its probabilities)
    """
    used = 0
    last_image: Optional[np.ndarray] = None
    last_probs: Optional[np.ndarray] = None
    for line in process.stdout:
        request = line.strip()
        if request != QUERY_REQUEST:
            if request:
                logger.debug("External attack: %s", request)
            continue
        if used >= max_queries:
            reply = {"error": "query budget exhausted", "queries": used}
        else:
            try:
                image = as_image(read_raw_tensor(query_path).image, oracle.input_shape)
                probs = oracle.query(image)
            except PeasError as e:
                raise ExternalAttackError(f"Bad query from external attack: {e}", cause=e) from e
            used += 1
            last_image, last_probs = image, probs
            reply = {"probs": [float(p) for p in probs], "queries": used}
        try:
            process.stdin.write(json.dumps(reply) + "\n")
            process.stdin.flush()
        except BrokenPipeError:
            break
    return used, last_image, last_probs


def _run_query(
    spec: AttackSpec,
    oracle: QueryOracle,
    start: np.ndarray,
    y: int,
    work: Path,
    surrogate: Optional[str],
) -> AttackResult:
    command = _prepare(spec, start, y, work, surrogate)
    timeout = spec.external.timeout or get_external_attack_timeout()
    stderr_path = work / "stderr.log"
    timed_out = threading.Event()
    with open(stderr_path, "w", encoding="utf-8") as stderr:
        try:
            process = subprocess.Popen(
                command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=stderr,
                text=True,
                bufsize=1,
                cwd=work,
            )
        except FileNotFoundError as e:
            raise AttackConfigError(f"External attack executable not found: {command[0]}") from e

        def _kill() -> None:
            timed_out.set()
            process.kill()

        timer = threading.Timer(timeout, _kill)
        timer.start()
        try:
            used, last_image, last_probs = _serve_queries(
                process, oracle, work / "query.peasimg", spec.external.max_queries
            )
        except ExternalAttackError:
            process.kill()
            raise
        finally:
            timer.cancel()
            for stream in (process.stdin, process.stdout):
                try:
                    stream.close()
                except OSError:
                    pass
            returncode = process.wait()

    if timed_out.is_set():
        raise ExternalAttackError(f"External attack timed out after {timeout}s: {command[0]}")
    if returncode != 0:
        detail = stderr_path.read_text(encoding="utf-8", errors="replace").strip().splitlines()[-1:] or [""]
        raise ExternalAttackError(f"External attack returned exit code {returncode}: {detail[0]}")
    adversarial = _read_output(work)
    fooled = (
        last_image is not None
        and np.array_equal(last_image, adversarial)
        and int(np.argmax(last_probs)) != int(y)
    )
    return AttackResult(adversarial=adversarial, queries_used=used, success_on_source=bool(fooled))


def _in_work_dir(work_dir: Optional[PathLike], run):
    if work_dir is not None:
        work = Path(work_dir)
        work.mkdir(parents=True, exist_ok=True)
        return run(work)
    with tempfile.TemporaryDirectory(prefix="peas-external-") as tmp:
        return run(Path(tmp))


def run_external_attack(
    spec: AttackSpec,
    start: np.ndarray,
    y: int,
    surrogate: Optional[str] = None,
    work_dir: Optional[PathLike] = None,
) -> AttackResult:
    """
    Run the configured external command on one start image.

    Args:
        spec: An external spec (command, timeout, context, epsilon).
        start: CHW start image.
        y: True label.
        surrogate: Surrogate model id, written to the sidecar.
        work_dir: Directory to exchange files in; a temporary one by default.

    Returns:
        AttackResult with ``queries_used = 0``; ``success_on_source`` is left False
        (the caller evaluates the surrogate when it has one).

    Raises:
        AttackConfigError: If the spec is not an external transfer spec.
        ExternalAttackError: If the command fails, times out or writes no readable output.
        BudgetViolationError: If the returned image violates the budget.
    """
    if spec.algorithm != "external":
        raise AttackConfigError(f"Expected an external spec, got '{spec.algorithm}'")
    if spec.is_query_attack:
        raise AttackConfigError("External query-mode attacks need a victim oracle")
    image = as_image(start)
    try:
        adversarial = _in_work_dir(work_dir, lambda work: _run(spec, image, y, work, surrogate))
    except (ExternalAttackError, AttackConfigError):
        raise
    except PeasError as e:
        raise ExternalAttackError(f"External attack file exchange failed: {e}", cause=e) from e
    check_budget(adversarial, image, spec.epsilon)
    return AttackResult(adversarial=adversarial, queries_used=0, success_on_source=False)


def run_external_query_attack(
    spec: AttackSpec,
    oracle: QueryOracle,
    start: np.ndarray,
    y: int,
    surrogate: Optional[str] = None,
    work_dir: Optional[PathLike] = None,
) -> AttackResult:
    """
    Run the configured external command as a query attack against ``oracle``.

    Returns:
        AttackResult whose ``queries_used`` counts the answered queries and whose
        ``success_on_source`` is True when the last answered query was the returned
        image and the victim mislabelled it.

    Raises:
        AttackConfigError: If the spec is not an external query-mode spec.
        ExternalAttackError: If the command fails, times out, sends an unreadable
            query or writes no readable output.
        BudgetViolationError: If the returned image violates the budget.
    """
    if spec.algorithm != "external" or not spec.is_query_attack:
        raise AttackConfigError(f"Expected an external query-mode spec, got '{spec.algorithm}'")
    image = as_image(start, oracle.input_shape)
    try:
        result = _in_work_dir(work_dir, lambda work: _run_query(spec, oracle, image, y, work, surrogate))
    except (ExternalAttackError, AttackConfigError):
        raise
    except PeasError as e:
        raise ExternalAttackError(f"External attack file exchange failed: {e}", cause=e) from e
    check_budget(result.adversarial, image, spec.epsilon)
    return result
