"""Document-grounded agentic question answering: outlines, search/read tools,
a reason-act agent loop, QA data synthesis, SFT export and evaluation."""

__version__ = "0.1.0"
