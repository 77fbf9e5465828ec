# Generated by Django 5.2.4 on 2026-10-17 09:12

from django.db import migrations, models
import django.db.models.deletion


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='TrainingRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('kind', models.CharField(choices=[('train', 'Train'), ('sweep', 'Sweep')], default='train', max_length=10)),
                ('fingerprint', models.CharField(help_text='SHA-256 of the canonical ModelConfig JSON', max_length=64)),
                ('variant', models.CharField(help_text='FULL, FULL-GFM, FULL-OF or FULL-OF-GFM', max_length=20)),
                ('seed', models.IntegerField()),
                ('corpus_dir', models.CharField(max_length=500)),
                ('checkpoint_path', models.CharField(blank=True, max_length=500)),
                ('report_path', models.CharField(blank=True, max_length=500)),
                ('sweep_parameter', models.CharField(blank=True, max_length=10)),
                ('sweep_value', models.IntegerField(blank=True, null=True)),
                ('train_accuracy', models.FloatField(blank=True, null=True)),
                ('val_accuracy', models.FloatField(blank=True, null=True)),
                ('wall_time', models.FloatField(blank=True, null=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('updated_at', models.DateTimeField(auto_now=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='EpochRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('epoch', models.PositiveIntegerField()),
                ('lr', models.FloatField()),
                ('encoder_lr', models.FloatField()),
                ('loss', models.FloatField()),
                ('train_accuracy', models.FloatField()),
                ('val_accuracy', models.FloatField(blank=True, null=True)),
                ('per_type_accuracy', models.JSONField(blank=True, default=dict)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='epochs', to='vqa.trainingrun')),
            ],
            options={
                'ordering': ['run', 'epoch'],
                'constraints': [models.UniqueConstraint(fields=('run', 'epoch'), name='unique_epoch_per_run')],
            },
        ),
    ]
