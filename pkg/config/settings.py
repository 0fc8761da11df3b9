import os
from typing import Dict, Any

from dotenv import load_dotenv

load_dotenv()


def _env_bool(name: str, default: str) -> bool:
    return os.getenv(name, default).lower() == 'true'


class Settings:
    def __init__(self):
        self.load_environment_variables()

    def load_environment_variables(self):
        '''Load all environment variables'''

        # Lattice Configuration
        self.MAX_SITES = int(os.getenv('BRANCHLAB_MAX_SITES', '14'))
        self.NORM_FLOOR = float(os.getenv('BRANCHLAB_NORM_FLOOR', '1e-8'))

        # Oracle Configuration
        self.DEFAULT_EPSILON = float(os.getenv('BRANCHLAB_EPSILON', '0.1'))
        self.DEFAULT_DELTA = float(os.getenv('BRANCHLAB_DELTA', '0.01'))
        self.EXACT_BUDGET = int(os.getenv('BRANCHLAB_EXACT_BUDGET', '12'))
        self.HEURISTIC_BUDGET = int(os.getenv('BRANCHLAB_HEURISTIC_BUDGET', '40'))
        self.MAX_SEARCH_STATES = int(os.getenv('BRANCHLAB_MAX_SEARCH_STATES', '400000'))
        self.BLOCK_DEPTH = int(os.getenv('BRANCHLAB_BLOCK_DEPTH', '2'))
        self.HEURISTIC_RESTARTS = int(os.getenv('BRANCHLAB_HEURISTIC_RESTARTS', '6'))

        # Branch Configuration
        self.TREE_THETA = float(os.getenv('BRANCHLAB_TREE_THETA', '0.99'))
        self.BRANCHINESS_THRESHOLD = int(os.getenv('BRANCHLAB_BRANCHINESS_THRESHOLD', '1'))

        # Cache Configuration
        self.CACHE_DIR = os.getenv('BRANCHLAB_CACHE_DIR', 'data/cache')
        self.CACHE_ENABLED = _env_bool('BRANCHLAB_CACHE_ENABLED', 'true')

        # Performance Configuration
        self.WORKERS = int(os.getenv('BRANCHLAB_WORKERS', '1'))

        # Logging Configuration
        self.LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
        self.LOG_FILE = os.getenv('LOG_FILE', '')
        self.ENABLE_STRUCTURED_LOGGING = _env_bool('ENABLE_STRUCTURED_LOGGING', 'false')

    def get_oracle_config(self) -> Dict[str, Any]:
        '''Get complexity oracle configuration'''
        return {
            'delta': self.DEFAULT_DELTA,
            'exact_budget': self.EXACT_BUDGET,
            'heuristic_budget': self.HEURISTIC_BUDGET,
            'max_search_states': self.MAX_SEARCH_STATES,
            'block_depth': self.BLOCK_DEPTH,
            'restarts': self.HEURISTIC_RESTARTS,
        }

    def get_branch_config(self) -> Dict[str, Any]:
        '''Get branch criterion configuration'''
        return {
            'epsilon': self.DEFAULT_EPSILON,
            'theta': self.TREE_THETA,
            'branchiness_threshold': self.BRANCHINESS_THRESHOLD,
            'norm_floor': self.NORM_FLOOR,
        }

    def get_cache_config(self) -> Dict[str, Any]:
        '''Get complexity cache configuration'''
        return {
            'path': os.path.join(self.CACHE_DIR, 'complexity.db'),
            'enabled': self.CACHE_ENABLED,
        }

    def validate_configuration(self) -> Dict[str, Any]:
        '''Validate configuration'''
        issues = []

        if not 1 <= self.MAX_SITES <= 20:
            issues.append("BRANCHLAB_MAX_SITES must lie in [1, 20]")

        if not 0 < self.DEFAULT_EPSILON < 0.5:
            issues.append("BRANCHLAB_EPSILON must lie in (0, 0.5)")

        if not 0 < self.DEFAULT_DELTA < 1:
            issues.append("BRANCHLAB_DELTA must lie in (0, 1)")

        if self.EXACT_BUDGET < 0 or self.HEURISTIC_BUDGET < 0:
            issues.append("search budgets must be nonnegative")

        if not 0 < self.TREE_THETA <= 1:
            issues.append("BRANCHLAB_TREE_THETA must lie in (0, 1]")

        if self.WORKERS < 1:
            issues.append("BRANCHLAB_WORKERS must be at least 1")

        return {
            'valid': len(issues) == 0,
            'issues': issues
        }

# Global settings instance
settings = Settings()
