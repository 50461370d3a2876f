"""Reach-avoid analysis and safe goal filtering for goal-conditioned policies."""

from .errors import SafealtError
from .filtering import FilterDecision, FilterOutcome, FilterRequest, \
    filter_continuous, filter_discrete
from .grids import GridSpec, Kind, SolveReport, ValueGrid, evaluate_policy, \
    evaluate_reward_sum, expert_action, load_grid, save_grid, solve_optimal
from .monitors import ConfusionMatrix, MonitorVerdict, boundary_sampler, \
    evaluate_monitor, monitor_ensemble, monitor_reach_avoid, monitor_reward_sum
from .policies import DemoSet, EnsemblePolicy, MlpPolicy, TrainReport, \
    collect_demos, ensemble_stats, train_bc
from .rankmetrics import rel_rank, top_rank
from .similarity import EmbeddingTable, GoalCatalog, IntentProfile, SirlEncoder, \
    d_cosine, d_euclidean, d_llm, d_sirl, rank_alternatives, train_sirl
from .simhuman import AlignmentCase, SimHuman, alignment_eval, answer_triplet, \
    gt_distance, gt_ranking
from .world import GoalValue, Outcome, Rect, State, Trajectory, WorldSpec, \
    failure_margin, rollout, rollout_value, step, target_margin

__version__ = "0.1.0"
