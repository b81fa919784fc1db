Page({
  data: {
    loaded: false,
  },

  onShow: function () {
    var nick = getApp().globalData.userInfo.nickName;
    var avatar = getApp().globalData.userInfo.avatarUrl;
    var profile = {};
    profile.nick = nick;
    profile.avatar = avatar;
    getApp().globalData.profile = profile;
    this.setData({
      loaded: true,
    });
  },
})
