"""
Celery configuration for distributed coverage experiments.
"""
from celery import Celery
from kombu import Exchange, Queue

from exactmeta import config

default_exchange = Exchange('default', type='direct')

task_queues = (
    Queue('default', default_exchange, routing_key='default'),
    Queue('simulate', default_exchange, routing_key='simulate'),
)

celery = Celery(
    'exactmeta',
    broker=config.CELERY_BROKER_URL,
    backend=config.CELERY_RESULT_BACKEND,
    include=['exactmeta.tasks']
)

celery.conf.update(
    result_expires=86400,  # long grids outlive the default hour

    # One replication at a time per worker process
    worker_prefetch_multiplier=1,
    task_acks_late=True,

    task_serializer='json',
    result_serializer='json',
    accept_content=['json'],

    task_default_queue='default',
    task_default_exchange='default',
    task_default_routing_key='default',
    task_queues=task_queues,

    task_routes={
        'exactmeta.tasks.run_replicate_task': {
            'queue': 'simulate',
            'routing_key': 'simulate',
        },
    },
)

if __name__ == '__main__':
    celery.start()
