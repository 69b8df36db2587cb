"""Caption-likelihood out-of-distribution detection toolkit.

Rough map of the package:

- :mod:`capood.records` -- vocabularies, token records, scored captions,
  class-prob records, POS lexicons, and their file formats.
- :mod:`capood.decode` -- greedy / beam / top-k / nucleus decoding over any
  next-token distribution provider.
- :mod:`capood.score` -- caption likelihood scores, max-softmax baseline,
  thresholding, per-POS probability profiles.
- :mod:`capood.detmetrics` -- AUROC, AUPR (both polarities), Bhattacharyya
  distance, ROC/PR curves.
- :mod:`capood.capmetrics` -- corpus BLEU-4 and ROUGE-L.
- :mod:`capood.images` / :mod:`capood.corrupt` / :mod:`capood.jpegdct` --
  raster I/O and the seeded image corruption suite.
- :mod:`capood.toyworld` / :mod:`capood.toymodel` -- the synthetic shapes
  world and the trainable log-linear captioner.
- :mod:`capood.experiment` / :mod:`capood.plots` -- manifest-driven runs,
  CSV/JSONL reports, SVG plots.
- :mod:`capood.cli` -- the ``capood`` command.
"""

__version__ = "0.1.0"
