# Django admin framework imports
from django.contrib import admin
from django.utils.html import format_html

# Local model imports
from .models import ExperimentRun

# Admin site branding
admin.site.site_header = "dronecell"
admin.site.site_title = "dronecell"
admin.site.index_title = "Recorded simulation and training runs"


@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    """Read-only browser for recorded runs"""
    list_display = (
        "command",
        "seed",
        "short_hash",
        "status_badge",
        "started_at",
        "formatted_duration",
        "output_dir",
    )
    list_filter = ("command", "status")
    search_fields = ("config_hash", "output_dir", "config_path")
    readonly_fields = [f.name for f in ExperimentRun._meta.fields]

    def has_add_permission(self, request):
        return False

    def short_hash(self, obj):
        return obj.config_hash[:10]
    short_hash.short_description = "Config"

    def status_badge(self, obj):
        colors = {"ok": "green", "failed": "red", "running": "orange"}
        return format_html(
            '<span style="color: {};">{}</span>', colors.get(obj.status, "black"), obj.get_status_display()
        )
    status_badge.short_description = "Status"

    def formatted_duration(self, obj):
        seconds = obj.duration_s
        if seconds is None:
            return "-"
        minutes, sec = divmod(int(seconds), 60)
        return f"{minutes}m {sec}s" if minutes else f"{sec}s"
    formatted_duration.short_description = "Duration"
