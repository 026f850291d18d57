from .config import ExperimentConfig, load_config, parse_config_text
from .experiment import RunRecord, run_experiment
from .pgm import export_image, import_image
from .phantoms import generate_phantom
