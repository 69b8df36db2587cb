"""Export adapter for the capood toolkit.

Runs any externally available captioning model (or image classifier, for
the max-softmax baseline) over a directory of images and writes the line
formats the capood toolkit ingests. The adapter never scores anything:
data flows one way, and the toolkit stays the sole source of numbers.

- :mod:`capexport.adapters` -- the model contracts, the JSON table stub,
  and the ``module:factory`` loader for real models.
- :mod:`capexport.decoding` -- greedy / beam / top-k / nucleus loops over
  an adapter's next-token distributions.
- :mod:`capexport.wire` -- record-line builders and the schema checks every
  line must pass before it is written.
- :mod:`capexport.export` -- the export job and its runner.
- :mod:`capexport.cli` -- the ``capexport`` command.

This package intentionally does not import capood; the contract between
the two is the wire format alone.
"""

__version__ = "0.1.0"
