"""lambdapm — inference and evaluation for a small language whose effects
are described by families of graded bind operators.

The interesting surface:

- :func:`lambdapm.signature.load_signature` / :class:`lambdapm.signature.Signature`
- :func:`lambdapm.infer.infer_program`
- :func:`lambdapm.solve.solve` / :func:`lambdapm.solve.coherence_check`
- :func:`lambdapm.laws.check_laws`
- :func:`lambdapm.runtime.run_program`
"""

from .signature import Signature, entail, load_signature, load_signature_file, principal_join
from .syntax import PmError, parse_program, parse_program_source, parse_term, print_type
from .infer import TypeProblem, infer_program
from .solve import solve, enumerate_solutions, coherence_check
from .laws import check_laws, check_derived_laws
from .runtime import RuntimeProblem, get_runtime, run_program

__version__ = "0.1.0"

__all__ = [
    "PmError",
    "RuntimeProblem",
    "Signature",
    "TypeProblem",
    "check_derived_laws",
    "check_laws",
    "coherence_check",
    "entail",
    "enumerate_solutions",
    "get_runtime",
    "infer_program",
    "load_signature",
    "load_signature_file",
    "parse_program",
    "parse_program_source",
    "parse_term",
    "principal_join",
    "print_type",
    "run_program",
    "solve",
    "__version__",
]
