"""
Celery tasks: one coverage-experiment replication per task.
"""
from celery.signals import task_success, task_failure, task_retry
from celery.utils.log import get_task_logger

from exactmeta.celery_app import celery

logger = get_task_logger(__name__)


@task_success.connect
def task_success_handler(sender=None, **kwargs):
    logger.info(f"Task {sender.name}[{sender.request.id}] succeeded")


@task_failure.connect
def task_failure_handler(sender=None, exception=None, **kwargs):
    logger.error(f"Task {sender.name}[{sender.request.id}] failed: {exception}")


@task_retry.connect
def task_retry_handler(sender=None, reason=None, **kwargs):
    logger.warning(f"Task {sender.name}[{sender.request.id}] retried: {reason}")


@celery.task(bind=True, name="exactmeta.tasks.run_replicate_task")
def run_replicate_task(self, cfg, index):
    """
    Evaluate replication `index` of an experiment cell.

    Args:
        cfg: ExperimentConfig as a dict
        index: Replication index (selects the seed substream)

    Returns:
        list: Per-method outcomes, JSON-serializable
    """
    # Import inside the task to avoid circular imports
    from exactmeta.simulate import ExperimentConfig, run_replicate

    experiment = ExperimentConfig.from_dict(cfg)
    logger.debug(f"Replicate {index} of {experiment.experiment} cell {experiment.cell}")
    return run_replicate(experiment, int(index))
