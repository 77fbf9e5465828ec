from django.db import models


class TrainingRun(models.Model):
    """One train, sweep or ablation run. The checkpoint and report files on disk are authoritative."""
    KIND_CHOICES = [
        ('train', 'Train'),
        ('sweep', 'Sweep'),
        ('ablation', 'Ablation'),
    ]

    kind = models.CharField(max_length=10, choices=KIND_CHOICES, default='train')
    fingerprint = models.CharField(max_length=64, help_text='SHA-256 of the canonical ModelConfig JSON')
    variant = models.CharField(max_length=20, help_text='FULL, FULL-GFM, FULL-OF or FULL-OF-GFM')
    seed = models.IntegerField()
    corpus_dir = models.CharField(max_length=500)
    checkpoint_path = models.CharField(max_length=500, blank=True)
    report_path = models.CharField(max_length=500, blank=True)

    # Sweep runs only
    sweep_parameter = models.CharField(max_length=10, blank=True)
    sweep_value = models.IntegerField(null=True, blank=True)

    train_accuracy = models.FloatField(null=True, blank=True)
    val_accuracy = models.FloatField(null=True, blank=True)
    wall_time = models.FloatField(null=True, blank=True)  # in seconds

    created_at = models.DateTimeField(auto_now_add=True)
    updated_at = models.DateTimeField(auto_now=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.variant} seed {self.seed} ({self.fingerprint[:12]})"


class EpochRecord(models.Model):
    run = models.ForeignKey(TrainingRun, on_delete=models.CASCADE, related_name='epochs')
    epoch = models.PositiveIntegerField()
    lr = models.FloatField()
    encoder_lr = models.FloatField()
    loss = models.FloatField()
    train_accuracy = models.FloatField()
    val_accuracy = models.FloatField(null=True, blank=True)
    per_type_accuracy = models.JSONField(default=dict, blank=True)

    class Meta:
        ordering = ['run', 'epoch']
        constraints = [
            models.UniqueConstraint(fields=['run', 'epoch'], name='unique_epoch_per_run'),
        ]

    def __str__(self):
        return f"{self.run} epoch {self.epoch}"
