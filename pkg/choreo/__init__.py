"""Choreography compiler package.

Submodules:
- gesture: skeletons, poses, curves, movements, homotopies, normalization
- category: composition, 2-cells, tensor and braids, law checkers, reports
- pulse: beat tracks, grouping, valzer, quantization, pulse functors
- choreography: choreography functors, naturality, styles, attention, ensemble sync
- script: lexer, parser, syntax tree and canonical printer
- elaborate: script to functor, law suite
- emit: JSON timeline and SVG keyframes
- laws: parallel law-check runner and report logging
- validation: command-line input checks
- errors: exception hierarchy
"""
