"""
Django settings for the qdgfn_lab project.

The project hosts no web views. Django provides configuration, the
management-command CLI, the run ledger (ORM over SQLite) and the test runner.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

from pathlib import Path
from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = config('SECRET_KEY', default='django-insecure-qdgfn-lab-local-only')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'vqa',
]


# Database
# The run ledger. Outputs on disk stay authoritative; the ledger only indexes them.

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': config('QDGFN_DB_PATH', default=str(BASE_DIR / 'runs.sqlite3')),
    }
}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Logging
# QDGFN_LOG_LEVEL is the only environment variable that changes runtime behaviour.

QDGFN_LOG_LEVEL = config('QDGFN_LOG_LEVEL', default='WARNING').upper()

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'plain',
        },
    },
    'loggers': {
        'vqa': {
            'handlers': ['console'],
            'level': QDGFN_LOG_LEVEL,
            'propagate': False,
        },
    },
}


# Model presets
# Every ModelConfig field appears in each preset. Config files and CLI flags
# overlay the chosen preset.

QDGFN_PRESETS = {
    'desk': {
        'd': 64,
        'heads': 4,
        'graphs': 3,
        'layers': 2,
        'k': 4,
        'P': 6,
        'max_question_length': 16,
        'hidden_multiplier': 2,
        'dropout': 0.1,
        'classifier_dropout': 0.2,
        'enable_gfm': True,
        'enable_of': True,
        'kept_row_renorm': True,
        'scale_filter_scores': False,
        'seed': 7,
        'batch_size': 16,
        'epochs': 30,
        'warmup_start': 5e-4,
        'warmup_end': 2e-3,
        'warmup_epochs': 3,
        'decay_start_epoch': 22,
        'decay_factor': 0.5,
        'decay_every': 3,
        'fixed_encoder_lr': 1e-3,
        'beta1': 0.9,
        'beta2': 0.999,
        'eps': 1e-8,
    },
    'paper': {
        'd': 768,
        'heads': 12,
        'graphs': 3,
        'layers': 3,
        'k': 15,
        'P': 20,
        'max_question_length': 20,
        'hidden_multiplier': 2,
        'dropout': 0.2,
        'classifier_dropout': 0.5,
        'enable_gfm': True,
        'enable_of': True,
        'kept_row_renorm': True,
        'scale_filter_scores': False,
        'seed': 7,
        'batch_size': 192,
        'epochs': 16,
        'warmup_start': 5e-4,
        'warmup_end': 2e-3,
        'warmup_epochs': 3,
        'decay_start_epoch': 11,
        'decay_factor': 0.2,
        'decay_every': 2,
        'fixed_encoder_lr': 1e-4,
        'beta1': 0.9,
        'beta2': 0.999,
        'eps': 1e-8,
    },
}

# Used when a command is given no --preset.
QDGFN_DEFAULT_PRESET = 'desk'

# Finite-difference settings shared by the gradcheck command and the test suite.
QDGFN_GRADCHECK_STEP = 1e-5
QDGFN_GRADCHECK_TOLERANCE = 1e-3

# Checked by `ablate --check` on median accuracies over the seeds: floors for the
# FULL variant, and the least validation lead FULL needs over FULL-OF-GFM (gap)
# and over each other ablation (lead).
QDGFN_ACCEPTANCE = {
    'train_accuracy': 0.9,
    'val_accuracy': 0.75,
    'ablation_gap': 0.01,
    'ablation_lead': 0.0,
}
