# Generated by Django 5.2.4 on 2026-10-17 15:40

from django.db import migrations, models


class Migration(migrations.Migration):

    dependencies = [
        ('vqa', '0001_initial'),
    ]

    operations = [
        migrations.AlterField(
            model_name='trainingrun',
            name='kind',
            field=models.CharField(choices=[('train', 'Train'), ('sweep', 'Sweep'), ('ablation', 'Ablation')], default='train', max_length=10),
        ),
    ]
