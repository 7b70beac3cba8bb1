"""Synthetic high-frequency NILM signatures from a PCA latent space."""

from .aggregator import (ActivationMatrix, LabeledDataset, SplitPair, aggregate_signatures,
                         build_activation_matrix, compute_power_shares, cond_mirror, make_datasets,
                         pearson, split_dataset)
from .config import RunConfig, parse_config
from .corpus import pseudo_real_corpus
from .genmodel import GenerationConfig, align_latent, gbm, kmeans, make_submetered, sample_covariance
from .latent import (LatentMatrix, ReconstructionModel, fit_pca, load_model, project, reconstruct,
                     reconstruction_mae, save_model)
from .metrics3d import MetricReport, embed, evaluate
from .signalio import (SignatureMatrix, VoltageReference, Waveform, align_cycles,
                       generate_voltage_reference, read_signature_matrix, segment_events,
                       window_signatures, write_signature_matrix)

__version__ = "0.1.0"
