"""Exact Bayesian inference for the stochastic SIR model with Weibull
infectious periods from interval incidence counts."""

from pdsir._backend import BACKEND
from pdsir.model import (IncidenceCounts, LatentPath, ObservationGrid, Params, PriorHyper,
                         SufficientStats, Trajectory, bin_infections, compartment_trajectory,
                         r0, sir_loglik, sufficient_stats)
from pdsir.simulate import SimConfig, simulate_conditioned, simulate_dataset, simulate_sir
from pdsir.proposal import (ProposalConfig, ProposalResult, propose_full, propose_subset,
                            proposal_logdensity, subset_size)
from pdsir.mcmc import (ChainOutput, McmcConfig, gibbs_beta, gibbs_lambda, mh_latent_step,
                        run_chain, run_single_site)
from pdsir.diagnostics import (PosteriorSummary, coverage_experiment, equal_tailed_ci, ess, rho_sweep,
                               summarize)
from pdsir.io import load_incidence_csv, read_incidence_csv, write_incidence_csv

__version__ = "0.1.0"
