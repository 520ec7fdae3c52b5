"""Surface-code memory under T1/T2 decoherence for superconducting architectures."""
