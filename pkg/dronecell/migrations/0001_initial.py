# Generated by Django 5.2.7 on 2026-10-18 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(max_length=20)),
                ('config_path', models.CharField(blank=True, max_length=500)),
                ('seed', models.BigIntegerField()),
                ('config_hash', models.CharField(help_text='git blob SHA-1 of the config bytes used', max_length=40)),
                ('output_dir', models.CharField(max_length=500)),
                ('started_at', models.DateTimeField()),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
                ('status', models.CharField(choices=[('running', 'Running'), ('ok', 'Completed'), ('failed', 'Failed')], default='running', max_length=10)),
                ('summary', models.JSONField(blank=True, default=dict)),
            ],
            options={
                'ordering': ('-started_at',),
            },
        ),
    ]
