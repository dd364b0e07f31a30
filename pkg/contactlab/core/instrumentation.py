import atexit
import sys
from collections.abc import Iterator
from contextlib import contextmanager

from opentelemetry import trace
from opentelemetry.sdk.resources import Resource
from opentelemetry.sdk.trace import TracerProvider
from opentelemetry.sdk.trace.export import (
    BatchSpanProcessor,
    ConsoleSpanExporter,
    SimpleSpanProcessor,
)

from contactlab.core.config import TraceConfig
from contactlab.core.report import CheckReport

tracer = trace.get_tracer("contactlab")


def setup_instrumentation_config(
    config: TraceConfig,
) -> None:
    """Sets up OpenTelemetry export to an OTLP collector and/or a file."""
    provider = TracerProvider(
        resource=Resource.create({"service.name": config.service_name})
    )
    if config.endpoint:
        from opentelemetry.exporter.otlp.proto.http.trace_exporter import (
            OTLPSpanExporter,
        )

        provider.add_span_processor(
            BatchSpanProcessor(OTLPSpanExporter(endpoint=config.endpoint))
        )
        print(f"Telemetry exporting to: {config.endpoint}", file=sys.stderr)
    if config.file:
        _add_file_exporter(provider, config.file)
    trace.set_tracer_provider(provider)
    atexit.register(provider.shutdown)


def setup_instrumentation_file(
    file: str,
) -> None:
    """Sets up OpenTelemetry instrumentation to log traces to a file."""
    provider = TracerProvider()
    _add_file_exporter(provider, file)
    trace.set_tracer_provider(provider)


def _add_file_exporter(provider: TracerProvider, file: str) -> None:
    file_stream = open(file, "w", encoding="utf-8")
    provider.add_span_processor(
        SimpleSpanProcessor(ConsoleSpanExporter(out=file_stream))
    )
    atexit.register(file_stream.close)
    print(f"Telemetry logging to: {file}", file=sys.stderr)


@contextmanager
def check_span(name: str, **attributes) -> Iterator[trace.Span]:
    """Span around one check or scenario; attributes with None are dropped."""
    with tracer.start_as_current_span(name) as span:
        for k, v in attributes.items():
            if v is not None:
                span.set_attribute(k, v)
        yield span


def record_report(span: trace.Span, report: CheckReport) -> None:
    span.set_attribute("verdict", report.verdict)
    span.set_attribute("points", report.summary.count)
    span.set_attribute("max_residual", report.summary.max)
    if report.verdict == "error":
        span.set_status(trace.Status(trace.StatusCode.ERROR, report.notes.get("error", "")))
