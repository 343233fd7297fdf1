import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'dao_bench.settings')
django.setup()
