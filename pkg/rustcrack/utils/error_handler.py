"""
Error types and centralized error handling for rustcrack.
"""
import logging
from datetime import datetime, timezone

logger = logging.getLogger(__name__)


class RustcrackError(Exception):
    """Base class for every error raised by the simulator."""


class ConfigError(RustcrackError):
    """Invalid configuration file, key or value."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        prefix = []
        if field:
            prefix.append(f'field {field}')
        if line is not None:
            prefix.append(f'line {line}')
        text = f"{', '.join(prefix)}: {message}" if prefix else message
        super().__init__(text)


class GeometryError(RustcrackError):
    """Geometry cannot be meshed (overlapping or out-of-bounds rebars)."""


class MeshError(RustcrackError):
    """Malformed mesh input."""

    def __init__(self, message, element_id=None):
        self.element_id = element_id
        if element_id is not None:
            message = f'{message} (element {element_id})'
        super().__init__(message)


class RefinementError(MeshError):
    """Requested element size does not resolve a required feature."""


class SingularityError(RustcrackError, ValueError):
    """Parameter combination at a pole of a closed-form relation."""


class SolverError(RustcrackError):
    """Linear solve failed or missed its residual target."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message)


class ConvergenceError(SolverError):
    """Nonlinear iteration did not converge."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message, {'iterations': iterations, 'residual': residual})
        self.iterations = iterations
        self.residual = residual


class NegativeConcentrationError(SolverError):
    """A species solve produced a concentration below tolerance."""

    def __init__(self, species, value, scale):
        super().__init__(
            f'negative {species} concentration {value:.3e} (max {scale:.3e}); reduce the time step',
            {'species': species, 'value': value, 'scale': scale},
        )
        self.species = species
        self.value = value


class ProbeError(RustcrackError):
    """Probe line request outside the meshed domain."""


class OutputError(RustcrackError):
    """Result files could not be written."""


class UnsupportedVariantError(RustcrackError, ValueError):
    """Phase-field model variant not available for this operation."""


# Errors the driver recovers from by shrinking the time step
RECOVERABLE_ERRORS = (SolverError,)

EXIT_CODES = {
    ConfigError: 2,
    GeometryError: 2,
    MeshError: 2,
    SolverError: 3,
    OutputError: 4,
    OSError: 4,
}


class ErrorHandler:
    """Centralized error logging for runs and commands"""

    @staticmethod
    def log_error(error, error_type='error', context=None):
        """
        Log an error with run context.

        Args:
            error: The exception or message
            error_type: error, warning or critical
            context: Additional information (run id, step, time)
        """
        error_details = {
            'timestamp': datetime.now(timezone.utc).isoformat(),
            'error_type': error_type,
            'error_class': type(error).__name__,
            'error_message': str(error),
            'diagnostics': getattr(error, 'diagnostics', None),
            'context': context or {},
        }
        log_message = f"[{error_type.upper()}] {error_details['error_class']}: {error_details['error_message']}"

        if error_type == 'critical':
            logger.critical(log_message, extra={'details': error_details})
        elif error_type == 'warning':
            logger.warning(log_message, extra={'details': error_details})
        else:
            logger.error(log_message, extra={'details': error_details})
        return error_details

    @staticmethod
    def exit_code(error):
        for error_class, code in EXIT_CODES.items():
            if isinstance(error, error_class):
                return code
        return 1


def register_error_handlers(command):
    """
    Wrap a CLI command so library errors become logged exit codes.

    Args:
        command: callable taking parsed arguments and returning an exit code
    """
    def handled(args):
        try:
            return command(args)
        except (RustcrackError, OSError) as error:
            ErrorHandler.log_error(error, error_type='critical',
                                   context={'command': getattr(args, 'command', None)})
            return ErrorHandler.exit_code(error)
    handled.__name__ = getattr(command, '__name__', 'handled')
    handled.__doc__ = command.__doc__
    return handled
