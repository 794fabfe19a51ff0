from .config import RunConfig, config_from_dict, load_config
from .experiment import run_experiment
from .kmeans import kmeans
from .sweep import run_sweep
