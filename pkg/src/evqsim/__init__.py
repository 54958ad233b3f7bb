"""Seeded discrete-event simulation of an EV fast-charging station with
impatient users, validated against closed-form queueing results."""

from .agents import (ChargingProfile, Disposition, EvAgent, SamplingSettings,
                     UserType, assumed_wait, charge_time, patience_threshold,
                     sample_agent)
from .config import ConfigError, RunConfig, from_file, from_mapping
from .engine import Engine, Event, EventCalendar, InvariantViolation, SchedulingError
from .metrics import (AggregateReport, MetricsReport, aggregate, compute_report,
                      export_csv, export_json, read_report_csv)
from .queueing import (SteadyState, birth_death_steady_state, lambda_eff,
                       mm1k_blocking, mm1k_chain, nsys_with_reneging,
                       reneging_death_rates, voluntary_balk_prob,
                       wq_with_reneging)
from .rng import ReplicationStreams, RngStream, sample_exponential
from .simulate import (ValidationResult, run_many, run_replication,
                       run_validation, validation_grid)
from .station import (AdmitDecision, Charger, ImpatientQueue, Port, PortState,
                      ScenarioKind, Station, WqEstimator, admit_decision,
                      estimated_wait)

__version__ = "0.1.0"
