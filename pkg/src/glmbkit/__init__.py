"""Labeled random finite set filtering and void-constrained sensor control."""

from .control import (ActionSpace, ControlConfig, PlanningModels, Platform, expected_reward,
                      feasible, select_action)
from .divergence import cs_divergence, glmb_inner_product
from .filter import EXACT, FilterCaps, estimate_state, marginalize, predict, update
from .mixture import GaussianMixture, IntensityMixture
from .models import BirthModel, LinearGaussianSensor, MotionModel, SensorModel
from .poisson import PoissonProcess, poisson_cs_divergence, poisson_void_probability
from .regions import AxisBox, Disc, HalfSpace
from .rfs import (GlmbComponent, GlmbDensity, Label, cardinality_distribution,
                  existence_probabilities, intensity_function, make_density, normalize,
                  truncate)
from .void import glmb_void_probability

__version__ = "0.1.0"
