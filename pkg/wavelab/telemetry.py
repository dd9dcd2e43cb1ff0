"""
OpenTelemetry tracing for long-running numerical operations.
Spans are exported to the console when WAVELAB_TRACING=console; otherwise
trace_operation is a no-op.
"""

import time
from typing import Optional
from contextlib import contextmanager

from opentelemetry import trace
from opentelemetry.sdk.trace import TracerProvider
from opentelemetry.sdk.trace.export import SimpleSpanProcessor, ConsoleSpanExporter
from opentelemetry.sdk.resources import Resource

from wavelab import __version__

# Global tracer
tracer: Optional[trace.Tracer] = None


def configure_tracing(mode: str = None) -> Optional[trace.Tracer]:
    """
    Configure OpenTelemetry tracing.

    Args:
        mode: "console" to print finished spans, "none" to disable.
              Defaults to the WAVELAB_TRACING setting.
    """
    global tracer

    if mode is None:
        from wavelab.config import config
        mode = config.TRACING

    if mode != "console":
        tracer = None
        return None

    resource = Resource.create({
        "service.name": "wavelab",
        "service.version": __version__,
    })

    provider = TracerProvider(resource=resource)
    provider.add_span_processor(SimpleSpanProcessor(ConsoleSpanExporter()))
    trace.set_tracer_provider(provider)
    tracer = trace.get_tracer(__name__)
    return tracer


@contextmanager
def trace_operation(operation_name: str, attributes: dict = None):
    """
    Context manager for tracing operations.

    Usage:
        with trace_operation("newton_solitary", {"omega": 0.5}):
            # your code here
    """
    if not tracer:
        yield None
        return

    with tracer.start_as_current_span(operation_name) as span:
        if attributes:
            for key, value in attributes.items():
                span.set_attribute(key, value)

        start_time = time.time()
        try:
            yield span
        except Exception as e:
            span.set_attribute("error", True)
            span.set_attribute("error.message", str(e))
            raise
        finally:
            duration = time.time() - start_time
            span.set_attribute("duration_seconds", duration)
