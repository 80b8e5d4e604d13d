"""featforge: group-wise reinforcement-guided feature generation for tabular data.

The engine iteratively reconstructs a dataset's feature space: features are
clustered into groups, three cascading reinforced agents pick
(group, operation, group), new features are generated group-wise, scored by a
downstream model, and the feature set is pruned back to a bounded size.  Every
surviving feature carries an expression tree over the original columns, so the
final feature set is fully traceable.
"""

from featforge.data_core import Dataset, SplitPlan, load_csv, make_folds, make_split
from featforge.operators import FeatureExpr, OperationKind
from featforge.pipeline import PipelineConfig, RunReport, run_grfg, run_rdg_baseline

__all__ = [
    "Dataset",
    "SplitPlan",
    "load_csv",
    "make_split",
    "make_folds",
    "OperationKind",
    "FeatureExpr",
    "PipelineConfig",
    "RunReport",
    "run_grfg",
    "run_rdg_baseline",
]

__version__ = "0.1.0"
