# Django framework imports
from django.db import models


class ExperimentRun(models.Model):
    """One management-command run; the manifest.json in output_dir stays authoritative"""

    STATUS_CHOICES = [
        ("running", "Running"),
        ("ok", "Completed"),
        ("failed", "Failed"),
    ]

    command = models.CharField(max_length=20)
    config_path = models.CharField(max_length=500, blank=True)
    seed = models.BigIntegerField()
    config_hash = models.CharField(
        max_length=40, help_text="git blob SHA-1 of the config bytes used"
    )
    output_dir = models.CharField(max_length=500)
    started_at = models.DateTimeField()
    finished_at = models.DateTimeField(null=True, blank=True)
    status = models.CharField(max_length=10, choices=STATUS_CHOICES, default="running")

    # Headline metrics of the run (outage hours, R^2, best fitness, ...)
    summary = models.JSONField(default=dict, blank=True)

    class Meta:
        ordering = ("-started_at",)

    def __str__(self):
        return f"{self.command} seed={self.seed} ({self.status})"

    @property
    def duration_s(self):
        if self.finished_at is None:
            return None
        return (self.finished_at - self.started_at).total_seconds()
