"""Design-space exploration for HLS directives: surrogate-gated evolutionary
search with Thompson-sampled proposal engines."""

from .bandit import ENGINES, ArmState, record_outcome, select_method
from .design_space import DesignPoint, KnobSpec, parse_knob_file, random_point, space_size, validate
from .evaluator import EvaluationRecord, Evaluator, EvaluatorSpec, brute_force
from .explorer import ExplorerConfig, RunState, checkpoint, explore_step, initial_sampling, resume, run
from .pareto import ParetoFrontier, ResourceRatios, ResourceWeights, hypervolume, update_frontier
from .probability import GateParams, get_prob_eval
from .proposal import EvolutionParams, Proposal
from .surrogate import ForestParams, SurrogateBundle, retrain_bundle

__version__ = "0.1.0"
