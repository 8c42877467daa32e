"""Signed Ego Network Models (SENM) from raw interaction timelines.

The package turns per-user posting timelines plus per-record sentiment labels
into signed ego networks: alters are clustered into concentric circles by
contact frequency (1-D mean shift), every ego-alter relationship receives a
positive or negative sign from the ratio of negative interactions, and the
results are rolled up into dataset-level structure and negativity statistics.

Subpackage map:

- :mod:`senm.ingest`    timeline parsing, interaction extraction, joins
- :mod:`senm.filters`   non-human / irregular-ego / inactive-relationship filters
- :mod:`senm.circles`   1-D mean shift, bandwidth selection, circle construction
- :mod:`senm.signs`     relationship signing by negative-interaction ratio
- :mod:`senm.metrics`   dataset statistics (sizes, circles, negativities, ranges)
- :mod:`senm.topics`    per-topic engagement and negativity aggregation
- :mod:`senm.synth`     synthetic datasets with planted ground truth
- :mod:`senm.pipeline`  end-to-end orchestration with a run manifest
- :mod:`senm.cli`       the ``senm`` command-line interface
"""

__version__ = "0.1.0"

from senm.records import (  # noqa: F401
    Interaction,
    RawRecord,
    Relationship,
    Timeline,
    EgoNetwork,
    SignedEgoNetwork,
)
